#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "attribution.hpp"
#include "test_util.hpp"

using namespace essaylens;
using test_util::make_essay;

namespace {

// Test-only smooth scorer: raw = sum of squared entries, gradient 2x. Not a
// real scorer (range is unbounded) but the analytic integral is exact:
// IG_i = x_i^2 against the zero baseline.
class QuadraticScorer final : public Scorer {
 public:
  explicit QuadraticScorer(std::size_t dim) : dim_(dim) {}
  std::string kind() const override { return "quadratic-test"; }
  std::size_t embedding_dim() const override { return dim_; }
  double raw_score(const Mat& m) const override {
    double s = 0.0;
    for (double v : m.data()) s += v * v;
    return s;
  }
  Mat input_gradient(const Mat& m) const override {
    Mat g(m.rows(), m.cols());
    for (std::size_t i = 0; i < m.data().size(); ++i) g.data()[i] = 2.0 * m.data()[i];
    return g;
  }
  std::vector<double> parameters() const override { return {}; }
  void set_parameters(const std::vector<double>&) override {}
  std::vector<double> parameter_gradient(const Mat&) const override { return {}; }
  std::unique_ptr<Scorer> clone() const override {
    return std::make_unique<QuadraticScorer>(dim_);
  }

 private:
  std::size_t dim_;
};

Mat random_matrix(std::uint64_t seed, std::size_t rows, std::size_t cols, double stddev = 0.3) {
  Rng rng(seed);
  Mat m(rows, cols);
  for (double& v : m.data()) v = rng.gaussian(0.0, stddev);
  return m;
}

EmbeddedEssay wrap(Mat m) {
  EmbeddedEssay essay;
  std::vector<std::string> tokens(m.rows(), "w");
  for (std::size_t i = 0; i < tokens.size(); ++i) tokens[i] += std::to_string(i);
  essay.source = make_essay(tokens);
  essay.matrix = std::move(m);
  return essay;
}

IgConfig config_of(std::size_t steps, QuadratureRule rule = QuadratureRule::Midpoint,
                   double tolerance = 0.05) {
  IgConfig c;
  c.steps = steps;
  c.rule = rule;
  c.completeness_tolerance = tolerance;
  return c;
}

}  // namespace

TEST_CASE("integrated gradients are exact for a linear scorer at any step count") {
  Rng rng(12);
  std::vector<double> weight(4);
  for (double& w : weight) w = rng.gaussian(0.0, 0.1);
  LinearBowScorer scorer(weight, 0.5);

  for (std::size_t steps : {std::size_t(1), std::size_t(50)}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const EmbeddedEssay essay = wrap(random_matrix(seed, 3, 4, 0.2));
      const double raw = scorer.raw_score(essay.matrix);
      REQUIRE(raw > 0.0);
      REQUIRE(raw < 1.0);
      const AttributionVector attr = integrated_gradients(scorer, essay, config_of(steps));
      for (std::size_t t = 0; t < 3; ++t) {
        double token_total = 0.0;
        for (std::size_t d = 0; d < 4; ++d) {
          const double expected = weight[d] * essay.matrix(t, d);
          CHECK(std::fabs(attr.per_dim(t, d) - expected) <= 1e-9);
          token_total += expected;
        }
        CHECK(std::fabs(attr.per_token[t] - token_total) <= 1e-9);
      }
      CHECK(std::fabs(attr.sum() - attr.raw_delta) <= 1e-9);
    }
  }
}

TEST_CASE("a constant scorer attributes nothing") {
  LinearBowScorer constant(std::vector<double>{0.0, 0.0}, 0.3);
  const EmbeddedEssay essay = wrap(random_matrix(4, 5, 2));
  const AttributionVector attr = integrated_gradients(constant, essay, config_of(50));
  for (double v : attr.per_token) CHECK(v == 0.0);
  CHECK(attr.raw_delta == 0.0);
  CHECK(attr.completeness_error == 0.0);
}

TEST_CASE("quadrature on F(x) = x^2 matches the analytic integral") {
  QuadraticScorer scorer(1);
  Mat x(1, 1);
  x(0, 0) = 3.0;
  const EmbeddedEssay essay = wrap(x);

  SUBCASE("midpoint at 50 steps is within 0.01 of 9") {
    const AttributionVector attr = integrated_gradients(scorer, essay, config_of(50));
    CHECK(std::fabs(attr.per_token[0] - 9.0) < 0.01);
  }
  SUBCASE("trapezoid integrates the linear integrand exactly") {
    const AttributionVector attr =
        integrated_gradients(scorer, essay, config_of(8, QuadratureRule::Trapezoid));
    CHECK(attr.per_token[0] == doctest::Approx(9.0).epsilon(1e-12));
  }
  SUBCASE("left-rule error is exactly 9/steps and halves as steps double") {
    double previous = 0.0;
    for (std::size_t steps : {10, 20, 40, 80}) {
      const AttributionVector attr = integrated_gradients_unchecked(
          scorer, essay, config_of(steps, QuadratureRule::Left));
      const double error = std::fabs(attr.per_token[0] - 9.0);
      CHECK(error == doctest::Approx(9.0 / static_cast<double>(steps)).epsilon(1e-9));
      if (previous > 0.0) CHECK(error <= previous / 2.0 + 1e-12);
      previous = error;
    }
  }
}

TEST_CASE("a coarse quadrature raises a completeness violation carrying the result") {
  QuadraticScorer scorer(1);
  Mat x(1, 1);
  x(0, 0) = 3.0;
  // Left rule with one step evaluates the gradient only at the baseline,
  // attributing 0 against a true delta of 9.
  try {
    integrated_gradients(scorer, wrap(x), config_of(1, QuadratureRule::Left));
    FAIL("expected CompletenessViolation");
  } catch (const CompletenessViolation& e) {
    CHECK(e.attribution.per_token.size() == 1);
    CHECK(e.attribution.per_token[0] == 0.0);
    CHECK(e.attribution.raw_delta == doctest::Approx(9.0));
    CHECK(e.attribution.completeness_error == doctest::Approx(1.0));
  }
}

TEST_CASE("completeness error shrinks as steps double on a smooth scorer") {
  MeanPoolMlpScorer scorer(5, 4, 31);
  const EmbeddedEssay essay = wrap(random_matrix(8, 6, 5, 1.2));
  double previous = -1.0;
  for (std::size_t steps : {5, 10, 20, 40, 80}) {
    const AttributionVector attr = integrated_gradients_unchecked(scorer, essay, config_of(steps));
    const double error = std::fabs(attr.sum() - attr.raw_delta);
    if (previous >= 0.0) CHECK(error <= previous + 1e-12);
    previous = error;
  }
}

TEST_CASE("completeness holds under the default config on a trained-scale mlp") {
  MeanPoolMlpScorer scorer(6, 5, 77);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const EmbeddedEssay essay = wrap(random_matrix(seed + 50, 8, 6, 1.0));
    const AttributionVector attr = integrated_gradients(scorer, essay, config_of(50));
    CHECK(attr.completeness_error < 0.05);
  }
}

TEST_CASE("zero input rows receive exactly zero attribution") {
  MeanPoolMlpScorer scorer(4, 3, 5);
  Mat m = random_matrix(9, 4, 4, 0.8);
  for (std::size_t d = 0; d < 4; ++d) m(2, d) = 0.0;  // an OOV row
  const AttributionVector attr = integrated_gradients(scorer, wrap(m), config_of(20));
  CHECK(attr.per_token[2] == 0.0);
  for (std::size_t d = 0; d < 4; ++d) CHECK(attr.per_dim(2, d) == 0.0);
}

TEST_CASE("mean-pool attributions permute with the essay rows, bitwise") {
  MeanPoolMlpScorer scorer(5, 4, 13);
  const Mat input = random_matrix(40, 6, 5, 0.9);
  const AttributionVector base = integrated_gradients(scorer, wrap(input), config_of(25));

  const std::vector<std::size_t> perm = {4, 0, 5, 2, 1, 3};
  Mat permuted(6, 5);
  for (std::size_t t = 0; t < 6; ++t) {
    for (std::size_t d = 0; d < 5; ++d) permuted(t, d) = input(perm[t], d);
  }
  const AttributionVector moved = integrated_gradients(scorer, wrap(permuted), config_of(25));
  for (std::size_t t = 0; t < 6; ++t) {
    CHECK(moved.per_token[t] == base.per_token[perm[t]]);
  }
  CHECK(moved.raw_delta == base.raw_delta);
}

TEST_CASE("rank sorts descending with index tie-breaks and percentile floors") {
  AttributionVector attr;

  SUBCASE("simple ordering") {
    attr.per_token = {0.5, -0.2, 0.9};
    const AttributionRanking r = rank(attr);
    CHECK(r.order == std::vector<std::size_t>{2, 0, 1});
  }
  SUBCASE("ties keep original index order") {
    attr.per_token = {0.5, 0.5, 0.5, 0.5};
    const AttributionRanking r = rank(attr);
    CHECK(r.order == std::vector<std::size_t>{0, 1, 2, 3});
  }
  SUBCASE("percentile sets use floor with a minimum of one") {
    attr.per_token = {9, 8, 7, 6, 5, 4, 3, 2, 1, 0};
    const AttributionRanking r = rank(attr);
    CHECK(r.top_fraction(0.2).size() == 2);
    CHECK(r.top_fraction(0.2) == std::vector<std::size_t>{0, 1});
    CHECK(r.top_fraction(0.05).size() == 1);
    CHECK(r.bottom_fraction(0.25) == std::vector<std::size_t>{8, 9});
    CHECK(r.bottom_fraction(0.3) == std::vector<std::size_t>{7, 8, 9});
    CHECK(r.top_fraction(0.0).empty());
    CHECK(r.bottom_fraction(0.0).empty());
    CHECK(r.top_fraction(1.0).size() == 10);
  }
  SUBCASE("fraction arithmetic does not truncate through float noise") {
    attr.per_token.assign(10, 1.0);
    const AttributionRanking r = rank(attr);
    CHECK(r.top_fraction(0.3).size() == 3);  // 0.3 * 10 must count as 3
    CHECK(r.top_fraction(0.7).size() == 7);
  }
}

namespace {

struct CorpusFixture {
  EmbeddingTable table{2};
  LabeledCorpus corpus;
  LinearBowScorer scorer{std::vector<double>{1.0, 0.0}, 0.5};

  CorpusFixture() {
    table.insert("hot", {0.04, 0.0});
    table.insert("cold", {-0.03, 0.0});
    table.insert("pad", {0.0, 5.0});  // orthogonal to the weight: zero attribution
    corpus.rubrics["P1"] = {"P1", 0, 10};
    const std::vector<std::vector<std::string>> essays = {
        {"hot", "pad", "cold"},
        {"hot", "hot", "pad"},
        {"cold", "pad", "pad", "hot"},
    };
    int id = 0;
    for (const auto& tokens : essays) {
      LabeledEssay entry;
      entry.essay = make_essay(tokens, "cf" + std::to_string(id++), "P1");
      entry.human_score = 5;
      corpus.essays.push_back(entry);
    }
  }
};

}  // namespace

TEST_CASE("attribute_corpus matches the single-essay path and aggregates words") {
  const CorpusFixture fx;
  const IgConfig config = config_of(30);

  LabeledCorpus one;
  one.rubrics = fx.corpus.rubrics;
  one.essays = {fx.corpus.essays[0]};
  const CorpusAttribution single = attribute_corpus(fx.scorer, one, fx.table, config);
  const AttributionVector direct =
      integrated_gradients(fx.scorer, embed(one.essays[0].essay, fx.table), config);
  REQUIRE(single.vectors.size() == 1);
  CHECK(single.vectors[0].per_token == direct.per_token);
  CHECK(single.vectors[0].raw_delta == direct.raw_delta);

  const CorpusAttribution full = attribute_corpus(fx.scorer, fx.corpus, fx.table, config);
  REQUIRE(full.vectors.size() == 3);
  CHECK(full.violation_indices.empty());

  // "pad" only appears where the weight ignores it: mean attribution 0 and
  // it lands among the least attributed words.
  REQUIRE(full.word_stats.count("pad"));
  CHECK(full.word_stats.at("pad").mean == 0.0);
  const auto least = least_attributed_words(full.word_stats, 1);
  REQUIRE(least.size() == 1);
  CHECK(least[0].first == "pad");

  const auto positive = top_positive_words(full.word_stats, 1);
  CHECK(positive[0].first == "hot");
  const auto negative = top_negative_words(full.word_stats, 1);
  CHECK(negative[0].first == "cold");

  // Word means follow from the linear form: one "hot" token is worth 0.04.
  CHECK(full.word_stats.at("hot").mean == doctest::Approx(0.04).epsilon(1e-9));
  CHECK(full.word_stats.at("cold").mean == doctest::Approx(-0.03).epsilon(1e-9));
}

TEST_CASE("attribute_corpus is deterministic and thread-count independent") {
  const CorpusFixture fx;
  const IgConfig config = config_of(30);
  const CorpusAttribution a = attribute_corpus(fx.scorer, fx.corpus, fx.table, config, 1);
  const CorpusAttribution b = attribute_corpus(fx.scorer, fx.corpus, fx.table, config, 3);
  REQUIRE(a.vectors.size() == b.vectors.size());
  for (std::size_t i = 0; i < a.vectors.size(); ++i) {
    CHECK(a.vectors[i].per_token == b.vectors[i].per_token);
    CHECK(a.scores[i].scaled == b.scores[i].scaled);
  }
}

TEST_CASE("attribute_corpus records completeness violations without failing") {
  QuadraticScorer scorer(2);
  LabeledCorpus corpus;
  corpus.rubrics["P1"] = {"P1", 0, 10};
  LabeledEssay entry;
  entry.essay = make_essay({"a", "b"});
  entry.human_score = 5;
  corpus.essays.push_back(entry);

  EmbeddingTable table(2);
  table.insert("a", {3.0, 0.0});
  table.insert("b", {0.0, 2.0});

  IgConfig config = config_of(1, QuadratureRule::Left, 0.05);
  const CorpusAttribution result = attribute_corpus(scorer, corpus, table, config);
  REQUIRE(result.violation_indices.size() == 1);
  CHECK(result.violation_indices[0] == 0);
  CHECK(result.vectors[0].completeness_error > 0.05);
}

TEST_CASE("config validation rejects degenerate settings") {
  LinearBowScorer scorer(std::vector<double>{0.1}, 0.5);
  const EmbeddedEssay essay = wrap(random_matrix(2, 2, 1, 0.1));
  CHECK_THROWS_AS(integrated_gradients(scorer, essay, config_of(0)), InvalidInputError);
  IgConfig bad = config_of(10);
  bad.completeness_tolerance = 0.0;
  CHECK_THROWS_AS(integrated_gradients(scorer, essay, bad), InvalidInputError);
  EmbeddedEssay empty;
  empty.matrix = Mat(0, 1);
  CHECK_THROWS_AS(integrated_gradients(scorer, empty, config_of(10)), EmptyEssayError);
  CHECK_THROWS_AS(parse_rule("simpson"), InvalidInputError);
}
