#include "metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace essaylens {

long round_score(double scaled) { return std::llround(scaled); }

double qwk(const std::vector<long>& rater_a, const std::vector<long>& rater_b,
           const Rubric& rubric) {
  if (rater_a.empty()) throw InvalidInputError("qwk needs at least one sample");
  if (rater_a.size() != rater_b.size()) {
    throw InvalidInputError("qwk raters have different lengths");
  }
  const long k = rubric.range() + 1;  // number of categories
  auto category = [&](long v, const char* who) {
    if (v < rubric.min_score || v > rubric.max_score) {
      throw OutOfRangeError(std::string("qwk ") + who + " score " + std::to_string(v) +
                            " outside rubric " + std::to_string(rubric.min_score) + ".." +
                            std::to_string(rubric.max_score));
    }
    return static_cast<std::size_t>(v - rubric.min_score);
  };

  const std::size_t n = rater_a.size();
  std::vector<double> observed(static_cast<std::size_t>(k * k), 0.0);
  std::vector<double> hist_a(static_cast<std::size_t>(k), 0.0);
  std::vector<double> hist_b(static_cast<std::size_t>(k), 0.0);
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t i = category(rater_a[s], "rater_a");
    const std::size_t j = category(rater_b[s], "rater_b");
    observed[i * static_cast<std::size_t>(k) + j] += 1.0;
    hist_a[i] += 1.0;
    hist_b[j] += 1.0;
  }

  const double denom_w = static_cast<double>((k - 1)) * static_cast<double>(k - 1);
  double weighted_observed = 0.0;
  double weighted_expected = 0.0;
  for (long i = 0; i < k; ++i) {
    for (long j = 0; j < k; ++j) {
      const double w = static_cast<double>((i - j) * (i - j)) / denom_w;
      const std::size_t idx = static_cast<std::size_t>(i * k + j);
      weighted_observed += w * observed[idx];
      weighted_expected += w * hist_a[static_cast<std::size_t>(i)] *
                           hist_b[static_cast<std::size_t>(j)] / static_cast<double>(n);
    }
  }
  if (weighted_expected == 0.0) {
    // Both raters constant and equal: perfect agreement by definition.
    return 1.0;
  }
  return 1.0 - weighted_observed / weighted_expected;
}

ImpactStats impact_stats(const std::vector<double>& original_scaled,
                         const std::vector<double>& perturbed_scaled, const Rubric& rubric) {
  if (original_scaled.empty()) throw InvalidInputError("impact_stats needs at least one sample");
  if (original_scaled.size() != perturbed_scaled.size()) {
    throw InvalidInputError("impact_stats score lists have different lengths");
  }
  const double range = static_cast<double>(rubric.range());
  const std::size_t n = original_scaled.size();

  double pos_total = 0.0, neg_total = 0.0;
  std::size_t pos_count = 0, neg_count = 0;
  double mean = 0.0;
  std::vector<double> diffs(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = perturbed_scaled[i] - original_scaled[i];
    diffs[i] = d;
    mean += d;
    if (d > 0.0) {
      pos_total += d;
      ++pos_count;
    } else if (d < 0.0) {
      neg_total += -d;
      ++neg_count;
    }
  }
  mean /= static_cast<double>(n);
  double variance = 0.0;
  for (double d : diffs) variance += (d - mean) * (d - mean);
  variance /= static_cast<double>(n);  // population variance

  ImpactStats stats;
  stats.n_samples = n;
  stats.mu_pos = pos_count ? (pos_total / static_cast<double>(pos_count)) / range * 100.0 : 0.0;
  stats.mu_neg = neg_count ? (neg_total / static_cast<double>(neg_count)) / range * 100.0 : 0.0;
  stats.n_pos = static_cast<double>(pos_count) / static_cast<double>(n) * 100.0;
  stats.n_neg = static_cast<double>(neg_count) / static_cast<double>(n) * 100.0;
  stats.sigma = std::sqrt(variance) / range * 100.0;
  return stats;
}

double overlap_top_k(const AttributionVector& attr, const std::vector<std::size_t>& injected,
                     double k_frac) {
  if (injected.empty()) throw InvalidInputError("overlap_top_k needs a non-empty injected set");
  if (k_frac <= 0.0 || k_frac > 1.0) {
    throw InvalidInputError("overlap_top_k fraction must lie in (0, 1]");
  }
  const auto top = rank(attr).top_fraction(k_frac);
  const std::set<std::size_t> top_set(top.begin(), top.end());
  std::size_t hits = 0;
  for (std::size_t idx : injected) {
    if (idx >= attr.size()) {
      throw OutOfRangeError("injected index " + std::to_string(idx) +
                            " is outside the attribution vector");
    }
    if (top_set.count(idx)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(injected.size()) * 100.0;
}

double attribution_churn(const AttributionRanking& before, const AttributionRanking& after,
                         double frac, const std::vector<long>& index_map) {
  if (index_map.size() != after.order.size()) {
    throw InvalidInputError("attribution_churn: index_map does not match the after ranking");
  }
  for (long v : index_map) {
    if (v >= 0 && static_cast<std::size_t>(v) >= before.order.size()) {
      throw InvalidInputError("attribution_churn: index_map points outside the before ranking");
    }
  }
  const auto before_top = before.top_fraction(frac);
  if (before_top.empty()) return 0.0;

  std::set<long> after_top_in_before;
  for (std::size_t idx : after.top_fraction(frac)) {
    const long mapped = index_map[idx];
    if (mapped >= 0) after_top_in_before.insert(mapped);
  }
  std::size_t exited = 0;
  for (std::size_t idx : before_top) {
    if (!after_top_in_before.count(static_cast<long>(idx))) ++exited;
  }
  return static_cast<double>(exited) / static_cast<double>(before_top.size()) * 100.0;
}

double sign_flip_churn(const AttributionVector& before, const AttributionVector& after,
                       double frac, const std::vector<long>& index_map) {
  if (index_map.size() != after.size()) {
    throw InvalidInputError("sign_flip_churn: index_map does not match the after attribution");
  }
  // original index -> surviving perturbed index
  std::vector<long> inverse(before.size(), -1);
  for (std::size_t i = 0; i < index_map.size(); ++i) {
    const long orig = index_map[i];
    if (orig >= 0) {
      if (static_cast<std::size_t>(orig) >= before.size()) {
        throw InvalidInputError("sign_flip_churn: index_map points outside the before attribution");
      }
      inverse[static_cast<std::size_t>(orig)] = static_cast<long>(i);
    }
  }
  auto sign = [](double v) { return v > 0.0 ? 1 : (v < 0.0 ? -1 : 0); };
  std::size_t survivors = 0;
  std::size_t flipped = 0;
  for (std::size_t idx : rank(before).top_fraction(frac)) {
    const long mapped = inverse[idx];
    if (mapped < 0) continue;
    ++survivors;
    if (sign(before.per_token[idx]) != sign(after.per_token[static_cast<std::size_t>(mapped)])) {
      ++flipped;
    }
  }
  if (survivors == 0) return 0.0;
  return static_cast<double>(flipped) / static_cast<double>(survivors) * 100.0;
}

double recovery_fraction(const PerturbContext& ctx, const TokenizedEssay& essay,
                         double tolerance) {
  if (essay.empty()) throw EmptyEssayError("recovery_fraction needs a non-empty essay");
  if (tolerance < 0.0) throw InvalidInputError("recovery tolerance must be non-negative");

  const EmbeddedEssay embedded = embed(essay, *ctx.table);
  const double original = score_essay(*ctx.scorer, embedded, ctx.rubric).scaled;
  const AttributionRanking ranking =
      rank(integrated_gradients_unchecked(*ctx.scorer, embedded, ctx.ig));

  const std::size_t n = essay.size();
  std::vector<std::size_t> selected;
  selected.reserve(n);
  for (std::size_t m = 1; m <= n; ++m) {
    selected.assign(ranking.order.begin(), ranking.order.begin() + static_cast<std::ptrdiff_t>(m));
    std::sort(selected.begin(), selected.end());
    TokenizedEssay prefix;
    prefix.essay_id = essay.essay_id;
    prefix.prompt_id = essay.prompt_id;
    for (std::size_t idx : selected) {
      prefix.tokens.push_back(essay.tokens[idx]);
      prefix.positions.push_back(essay.positions[idx]);
    }
    prefix.sentence_spans = sentence_spans_for(prefix.tokens);
    const double score = score_essay(*ctx.scorer, embed(prefix, *ctx.table), ctx.rubric).scaled;
    if (std::fabs(score - original) <= tolerance) {
      return static_cast<double>(m) / static_cast<double>(n);
    }
  }
  return 1.0;
}

CurveMode parse_curve_mode(const std::string& name) {
  if (name == "deletion" || name == "delete-least") return CurveMode::DeleteLeast;
  if (name == "random-deletion" || name == "delete-random") return CurveMode::DeleteRandom;
  if (name == "addition" || name == "add-top") return CurveMode::AddTop;
  throw InvalidInputError("unknown curve mode \"" + name +
                          "\" (expected deletion, random-deletion or addition)");
}

std::string curve_mode_name(CurveMode mode) {
  switch (mode) {
    case CurveMode::DeleteLeast: return "deletion";
    case CurveMode::DeleteRandom: return "random-deletion";
    case CurveMode::AddTop: return "addition";
  }
  return "deletion";
}

std::vector<CurvePoint> relative_qwk_curve(const Scorer& scorer, const EmbeddingTable& table,
                                           const LabeledCorpus& corpus, const Rubric& rubric,
                                           CurveMode mode, const Schedule& schedule,
                                           std::uint64_t seed, const IgConfig& ig, int threads) {
  schedule.validate();
  if (corpus.essays.empty()) throw InvalidInputError("curve needs a non-empty corpus");

  BatterySpec spec;
  spec.schedule = schedule;
  spec.seed = seed;
  spec.ig = ig;
  spec.threads = threads;
  switch (mode) {
    case CurveMode::DeleteLeast: spec.strategy = "delete-least"; break;
    case CurveMode::DeleteRandom: spec.strategy = "delete-random"; break;
    case CurveMode::AddTop: spec.strategy = "add-top"; break;
  }
  const BatteryRun run = run_battery(scorer, table, corpus, spec);

  std::vector<CurvePoint> points;
  for (double f : schedule.fractions) {
    std::vector<long> human, perturbed, baseline;
    for (std::size_t o = 0; o < run.outcomes.size(); ++o) {
      const PerturbationOutcome& outcome = run.outcomes[o];
      if (outcome.strategy.fraction != f) continue;
      const std::size_t essay = run.essay_index[o];
      human.push_back(corpus.essays[essay].human_score);
      perturbed.push_back(std::clamp(round_score(outcome.perturbed.score.scaled),
                                     rubric.min_score, rubric.max_score));
      baseline.push_back(std::clamp(round_score(outcome.original.score.scaled),
                                    rubric.min_score, rubric.max_score));
    }
    CurvePoint point;
    point.fraction = f;
    point.n_samples = human.size();
    if (!human.empty()) {
      point.qwk = qwk(human, perturbed, rubric);
      point.baseline_qwk = qwk(human, baseline, rubric);
      point.relative_qwk = point.baseline_qwk != 0.0
                               ? point.qwk / point.baseline_qwk
                               : std::numeric_limits<double>::quiet_NaN();
    } else {
      point.qwk = point.baseline_qwk = 0.0;
      point.relative_qwk = std::numeric_limits<double>::quiet_NaN();
    }
    points.push_back(point);
  }
  return points;
}

}  // namespace essaylens
