#include "attribution.hpp"

#include <algorithm>
#include <cmath>

namespace essaylens {

QuadratureRule parse_rule(const std::string& name) {
  if (name == "left") return QuadratureRule::Left;
  if (name == "midpoint") return QuadratureRule::Midpoint;
  if (name == "trapezoid") return QuadratureRule::Trapezoid;
  throw InvalidInputError("unknown quadrature rule \"" + name +
                          "\" (expected left, midpoint or trapezoid)");
}

std::string rule_name(QuadratureRule rule) {
  switch (rule) {
    case QuadratureRule::Left: return "left";
    case QuadratureRule::Midpoint: return "midpoint";
    case QuadratureRule::Trapezoid: return "trapezoid";
  }
  return "midpoint";
}

void IgConfig::validate() const {
  if (steps == 0) throw InvalidInputError("integrated gradients needs steps >= 1");
  if (completeness_tolerance <= 0.0) {
    throw InvalidInputError("completeness tolerance must be positive");
  }
}

double AttributionVector::sum() const {
  double total = 0.0;
  for (double v : per_token) total += v;
  return total;
}

namespace {

// Path nodes (alpha, weight) for one integration rule over [0, 1].
std::vector<std::pair<double, double>> quadrature_nodes(QuadratureRule rule, std::size_t steps) {
  std::vector<std::pair<double, double>> nodes;
  const double h = 1.0 / static_cast<double>(steps);
  switch (rule) {
    case QuadratureRule::Left:
      for (std::size_t k = 0; k < steps; ++k) nodes.emplace_back(k * h, h);
      break;
    case QuadratureRule::Midpoint:
      for (std::size_t k = 0; k < steps; ++k) {
        nodes.emplace_back((static_cast<double>(k) + 0.5) * h, h);
      }
      break;
    case QuadratureRule::Trapezoid:
      for (std::size_t k = 0; k <= steps; ++k) {
        const double w = (k == 0 || k == steps) ? h / 2.0 : h;
        nodes.emplace_back(k * h, w);
      }
      break;
  }
  return nodes;
}

}  // namespace

AttributionVector integrated_gradients_unchecked(const Scorer& scorer, const EmbeddedEssay& essay,
                                                 const IgConfig& config) {
  config.validate();
  const Mat& input = essay.matrix;
  if (input.rows() == 0) throw EmptyEssayError("cannot attribute an empty essay");
  if (input.cols() != scorer.embedding_dim()) {
    throw InvalidInputError("essay embedding dimension does not match scorer");
  }

  const std::size_t n = input.rows();
  const std::size_t dim = input.cols();

  Mat avg_gradient(n, dim);
  Mat point(n, dim);
  for (const auto& [alpha, weight] : quadrature_nodes(config.rule, config.steps)) {
    // Baseline is the zero matrix, so the path point is alpha * input.
    for (std::size_t i = 0; i < input.data().size(); ++i) {
      point.data()[i] = alpha * input.data()[i];
    }
    const Mat grad = scorer.input_gradient(point);
    for (std::size_t i = 0; i < avg_gradient.data().size(); ++i) {
      avg_gradient.data()[i] += weight * grad.data()[i];
    }
  }

  AttributionVector attr;
  attr.config = config;
  attr.per_dim = Mat(n, dim);
  attr.per_token.assign(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double token_total = 0.0;
    for (std::size_t d = 0; d < dim; ++d) {
      const double v = input(t, d) * avg_gradient(t, d);
      attr.per_dim(t, d) = v;
      token_total += v;
    }
    attr.per_token[t] = token_total;
  }

  const double score_x = scorer.raw_score(input);
  const double score_b = scorer.raw_score(Mat(n, dim));
  attr.raw_delta = score_x - score_b;
  attr.completeness_error =
      std::fabs(attr.sum() - attr.raw_delta) / std::max(std::fabs(attr.raw_delta), 1e-12);
  return attr;
}

AttributionVector integrated_gradients(const Scorer& scorer, const EmbeddedEssay& essay,
                                       const IgConfig& config) {
  AttributionVector attr = integrated_gradients_unchecked(scorer, essay, config);
  if (attr.completeness_error > config.completeness_tolerance) {
    const double err = attr.completeness_error;
    throw CompletenessViolation(
        std::move(attr), "completeness error " + format_double(err) + " exceeds tolerance " +
                             format_double(config.completeness_tolerance) +
                             " (retry with more steps)");
  }
  return attr;
}

std::size_t AttributionRanking::percentile_count(double p) const {
  if (p <= 0.0 || order.empty()) return 0;
  return std::max<std::size_t>(fraction_count(p, order.size()), 1);
}

std::vector<std::size_t> AttributionRanking::top_fraction(double p) const {
  const std::size_t m = percentile_count(p);
  return {order.begin(), order.begin() + static_cast<std::ptrdiff_t>(m)};
}

std::vector<std::size_t> AttributionRanking::bottom_fraction(double p) const {
  const std::size_t m = percentile_count(p);
  return {order.end() - static_cast<std::ptrdiff_t>(m), order.end()};
}

AttributionRanking rank(const AttributionVector& attr) {
  AttributionRanking ranking;
  ranking.per_token = attr.per_token;
  ranking.order.resize(attr.per_token.size());
  for (std::size_t i = 0; i < ranking.order.size(); ++i) ranking.order[i] = i;
  std::stable_sort(ranking.order.begin(), ranking.order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return attr.per_token[a] > attr.per_token[b];
                   });
  return ranking;
}

CorpusAttribution attribute_corpus(const Scorer& scorer, const LabeledCorpus& corpus,
                                   const EmbeddingTable& table, const IgConfig& config,
                                   int threads) {
  if (corpus.essays.empty()) throw InvalidInputError("cannot attribute an empty corpus");
  config.validate();

  CorpusAttribution result;
  result.vectors.resize(corpus.essays.size());
  result.scores.resize(corpus.essays.size());

  parallel_for(corpus.essays.size(), threads, [&](std::size_t i) {
    const auto& entry = corpus.essays[i];
    const Rubric& rubric = corpus.rubric_for(entry.essay.prompt_id);
    const EmbeddedEssay embedded = embed(entry.essay, table);
    result.vectors[i] = integrated_gradients_unchecked(scorer, embedded, config);
    result.scores[i] = scale_score(scorer.raw_score(embedded.matrix), rubric);
  });

  for (std::size_t i = 0; i < result.vectors.size(); ++i) {
    if (result.vectors[i].completeness_error > config.completeness_tolerance) {
      result.violation_indices.push_back(i);
    }
  }

  struct Accumulator {
    std::size_t count = 0;
    double total = 0.0;
    double total_abs = 0.0;
  };
  std::map<std::string, Accumulator> acc;
  for (std::size_t i = 0; i < corpus.essays.size(); ++i) {
    const auto& tokens = corpus.essays[i].essay.tokens;
    const auto& values = result.vectors[i].per_token;
    for (std::size_t t = 0; t < tokens.size(); ++t) {
      Accumulator& a = acc[tokens[t]];
      ++a.count;
      a.total += values[t];
      a.total_abs += std::fabs(values[t]);
    }
  }
  for (const auto& [word, a] : acc) {
    WordStat stat;
    stat.count = a.count;
    stat.mean = a.total / static_cast<double>(a.count);
    stat.mean_abs = a.total_abs / static_cast<double>(a.count);
    result.word_stats[word] = stat;
  }
  return result;
}

namespace {

std::vector<std::pair<std::string, WordStat>> sorted_words(
    const std::map<std::string, WordStat>& stats, std::size_t k,
    const std::function<bool(const WordStat&, const WordStat&)>& better) {
  std::vector<std::pair<std::string, WordStat>> all(stats.begin(), stats.end());
  std::stable_sort(all.begin(), all.end(), [&](const auto& a, const auto& b) {
    return better(a.second, b.second);  // map order makes ties lexicographic
  });
  if (all.size() > k) all.resize(k);
  return all;
}

}  // namespace

std::vector<std::pair<std::string, WordStat>> top_positive_words(
    const std::map<std::string, WordStat>& stats, std::size_t k) {
  return sorted_words(stats, k, [](const WordStat& a, const WordStat& b) {
    return a.mean > b.mean;
  });
}

std::vector<std::pair<std::string, WordStat>> top_negative_words(
    const std::map<std::string, WordStat>& stats, std::size_t k) {
  return sorted_words(stats, k, [](const WordStat& a, const WordStat& b) {
    return a.mean < b.mean;
  });
}

std::vector<std::pair<std::string, WordStat>> least_attributed_words(
    const std::map<std::string, WordStat>& stats, std::size_t k) {
  return sorted_words(stats, k, [](const WordStat& a, const WordStat& b) {
    return a.mean_abs < b.mean_abs;
  });
}

}  // namespace essaylens
