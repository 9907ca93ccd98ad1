#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "common.hpp"
#include "corpus.hpp"
#include "embedding.hpp"
#include "scorer.hpp"

namespace essaylens {

enum class QuadratureRule { Left, Midpoint, Trapezoid };

QuadratureRule parse_rule(const std::string& name);
std::string rule_name(QuadratureRule rule);

struct IgConfig {
  std::size_t steps = 50;
  QuadratureRule rule = QuadratureRule::Midpoint;
  double completeness_tolerance = 0.05;

  void validate() const;
};

// Per-token attribution of raw_score(x) - raw_score(baseline), with the
// baseline the all-zero matrix of the same shape. per_dim holds the
// integrated gradient per (token, dimension); per_token sums it over the
// embedding dimensions so the values stay additive.
struct AttributionVector {
  std::vector<double> per_token;
  Mat per_dim;
  double raw_delta = 0.0;
  double completeness_error = 0.0;  // |sum - raw_delta| / max(|raw_delta|, 1e-12)
  IgConfig config;

  std::size_t size() const { return per_token.size(); }
  double sum() const;
};

struct CompletenessViolation : Error {
  CompletenessViolation(AttributionVector attr, const std::string& msg)
      : Error(msg), attribution(std::move(attr)) {}
  AttributionVector attribution;  // still usable; callers may retry with more steps
};

// Straight-line path quadrature from the zero baseline to the input. Throws
// CompletenessViolation (carrying the result) when the relative completeness
// error exceeds the configured tolerance.
AttributionVector integrated_gradients(const Scorer& scorer, const EmbeddedEssay& essay,
                                       const IgConfig& config);

// Same computation without the tolerance gate; used where violations are
// recorded instead of raised.
AttributionVector integrated_gradients_unchecked(const Scorer& scorer, const EmbeddedEssay& essay,
                                                 const IgConfig& config);

// Token indices sorted by attribution, descending, ties broken by ascending
// token index. Percentile sets use floor(p*n) with a minimum of one element
// for p > 0 on non-empty essays.
struct AttributionRanking {
  std::vector<std::size_t> order;
  std::vector<double> per_token;

  std::vector<std::size_t> top_fraction(double p) const;
  std::vector<std::size_t> bottom_fraction(double p) const;

 private:
  std::size_t percentile_count(double p) const;
};

AttributionRanking rank(const AttributionVector& attr);

struct WordStat {
  std::size_t count = 0;
  double mean = 0.0;
  double mean_abs = 0.0;
};

struct CorpusAttribution {
  std::vector<AttributionVector> vectors;   // corpus order
  std::vector<ScaledScore> scores;
  std::vector<std::size_t> violation_indices;
  std::map<std::string, WordStat> word_stats;
};

// One attribution per essay, computed independently (optionally across
// threads) and merged in corpus order. Completeness violations are recorded,
// not raised.
CorpusAttribution attribute_corpus(const Scorer& scorer, const LabeledCorpus& corpus,
                                   const EmbeddingTable& table, const IgConfig& config,
                                   int threads = 1);

std::vector<std::pair<std::string, WordStat>> top_positive_words(
    const std::map<std::string, WordStat>& stats, std::size_t k);
std::vector<std::pair<std::string, WordStat>> top_negative_words(
    const std::map<std::string, WordStat>& stats, std::size_t k);
std::vector<std::pair<std::string, WordStat>> least_attributed_words(
    const std::map<std::string, WordStat>& stats, std::size_t k);

}  // namespace essaylens
