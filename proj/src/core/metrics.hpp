#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "attribution.hpp"
#include "common.hpp"
#include "corpus.hpp"
#include "perturb.hpp"
#include "scorer.hpp"

namespace essaylens {

// Score-change statistics over a perturbed batch, all expressed as percent of
// the rubric range. Zero diffs count in neither the positive nor negative
// bucket; sigma is the population standard deviation of every diff.
struct ImpactStats {
  double mu_pos = 0.0;
  double mu_neg = 0.0;
  double n_pos = 0.0;
  double n_neg = 0.0;
  double sigma = 0.0;
  std::size_t n_samples = 0;
};

struct AgreementReport {
  double qwk = 0.0;
  double relative_qwk = 0.0;
  std::size_t n_samples = 0;
};

// Quadratic weighted kappa over the categories rubric.min..rubric.max.
// Histograms span the whole rubric. Two constant, equal raters have no
// expected disagreement and score 1 by definition.
double qwk(const std::vector<long>& rater_a, const std::vector<long>& rater_b,
           const Rubric& rubric);

// Nearest integer, halves away from zero; the category assignment used before
// any kappa computation.
long round_score(double scaled);

ImpactStats impact_stats(const std::vector<double>& original_scaled,
                         const std::vector<double>& perturbed_scaled, const Rubric& rubric);

// Percentage of the injected token indices that land in the top k_frac of the
// attribution ranking.
double overlap_top_k(const AttributionVector& attr, const std::vector<std::size_t>& injected,
                     double k_frac);

// Percentage of the before-top-frac tokens that are no longer in the
// after-top-frac set, matching tokens through index_map (perturbed index ->
// original index, -1 for injected).
double attribution_churn(const AttributionRanking& before, const AttributionRanking& after,
                         double frac, const std::vector<long>& index_map);

// Secondary churn reading: percentage of the surviving before-top-frac tokens
// whose attribution changed sign.
double sign_flip_churn(const AttributionVector& before, const AttributionVector& after,
                       double frac, const std::vector<long>& index_map);

// Smallest fraction of top-attributed tokens (1-token sweep of the word-soup
// construction) whose score lands within `tolerance` scaled points of the
// original. Always in (0, 1]: the full essay reproduces its own score.
double recovery_fraction(const PerturbContext& ctx, const TokenizedEssay& essay,
                         double tolerance = 1.0);

struct CurvePoint {
  double fraction = 0.0;
  double qwk = 0.0;
  double baseline_qwk = 0.0;
  double relative_qwk = 0.0;
  std::size_t n_samples = 0;
};

enum class CurveMode { DeleteLeast, DeleteRandom, AddTop };

CurveMode parse_curve_mode(const std::string& name);
std::string curve_mode_name(CurveMode mode);

// Model-vs-human QWK at each schedule fraction, relative to the unperturbed
// QWK over the same essays. Essays a step cannot apply to are dropped from
// that fraction (the baseline is recomputed over the retained set).
std::vector<CurvePoint> relative_qwk_curve(const Scorer& scorer, const EmbeddingTable& table,
                                           const LabeledCorpus& corpus, const Rubric& rubric,
                                           CurveMode mode, const Schedule& schedule,
                                           std::uint64_t seed, const IgConfig& ig,
                                           int threads = 1);

}  // namespace essaylens
