#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "attribution.hpp"
#include "common.hpp"
#include "corpus.hpp"
#include "embedding.hpp"
#include "scorer.hpp"

namespace essaylens {

// Everything a strategy needs to score and attribute both sides of an edit.
struct PerturbContext {
  const Scorer* scorer = nullptr;
  const EmbeddingTable* table = nullptr;
  Rubric rubric;
  IgConfig ig;
};

struct StrategyInfo {
  std::string name;
  double fraction = -1.0;  // schedule fraction where applicable, else -1
  std::vector<std::pair<std::string, std::string>> params;
};

// One side of a perturbation: the essay, its scaled score and attribution.
// completeness_ok is false when the attribution exceeded the configured
// tolerance (the values are still present).
struct EssayEvaluation {
  TokenizedEssay essay;
  ScaledScore score;
  AttributionVector attribution;
  bool completeness_ok = true;
};

struct PerturbationOutcome {
  StrategyInfo strategy;
  std::optional<std::uint64_t> seed;
  EssayEvaluation original;
  EssayEvaluation perturbed;
  // index_map[i] is the original-essay token index that perturbed token i
  // came from, or -1 for injected tokens.
  std::vector<long> index_map;
  std::vector<std::size_t> injected;  // perturbed-essay indices (inject-span only)
};

struct Schedule {
  std::vector<double> fractions;  // strictly ascending, in (0, 1]
  bool recompute = true;          // re-rank after each deletion step

  void validate() const;
};

struct ScheduleRun {
  std::vector<PerturbationOutcome> outcomes;
  std::vector<std::pair<double, std::string>> skipped;  // (fraction, reason)
};

EssayEvaluation evaluate_essay(const PerturbContext& ctx, const TokenizedEssay& essay);

// Removes the floor(f*n) lowest-attributed tokens at each schedule fraction,
// re-ranking the survivors between steps when schedule.recompute is set.
// A fraction that would empty the essay is recorded as skipped.
ScheduleRun delete_least(const PerturbContext& ctx, const TokenizedEssay& essay,
                         const Schedule& schedule);

// Same shape as delete_least but the removal order is a seeded random
// permutation; the control arm for attribution-guided deletion.
ScheduleRun delete_random(const PerturbContext& ctx, const TokenizedEssay& essay,
                          const Schedule& schedule, std::uint64_t seed);

// One-shot deletion at a single fraction in [0, 1]; f = 0 is the identity.
PerturbationOutcome delete_least_at(const PerturbContext& ctx, const TokenizedEssay& essay,
                                    double fraction);

// Keeps only the floor(f*n) top-attributed tokens (original order) at each
// fraction, ranking the full essay once. A fraction selecting zero tokens
// yields an empty essay scored at the rubric minimum.
ScheduleRun add_top(const PerturbContext& ctx, const TokenizedEssay& essay,
                    const Schedule& schedule);

// add_top at a single fraction; the word-soup construction.
PerturbationOutcome word_soup(const PerturbContext& ctx, const TokenizedEssay& essay,
                              double fraction);

// Permutes sentence order (Fisher-Yates over spans), token order within each
// sentence preserved. Throws NotApplicableError on single-sentence essays.
PerturbationOutcome shuffle_sentences(const PerturbContext& ctx, const TokenizedEssay& essay,
                                      std::uint64_t seed);

// Permutes all tokens; sentence spans are recomputed from the terminator
// positions after the shuffle. Needs at least 2 tokens.
PerturbationOutcome shuffle_words(const PerturbContext& ctx, const TokenizedEssay& essay,
                                  std::uint64_t seed);

// Replaces the top- and bottom-attributed percentile sets with their nearest
// embedding-space neighbors; out-of-vocabulary tokens stay put and are
// counted in the strategy params.
PerturbationOutcome swap_synonyms(const PerturbContext& ctx, const TokenizedEssay& essay,
                                  double top_fraction, double bottom_fraction);

struct InjectPosition {
  enum class Kind { Begin, End, Index } kind = Kind::Begin;
  std::size_t index = 0;

  static InjectPosition begin() { return {Kind::Begin, 0}; }
  static InjectPosition end() { return {Kind::End, 0}; }
  static InjectPosition at(std::size_t i) { return {Kind::Index, i}; }
  static InjectPosition parse(const std::string& text);
  std::string describe() const;
};

// Splices the span's tokens into the essay at the given position and records
// which perturbed indices are the injected ones.
PerturbationOutcome inject_span(const PerturbContext& ctx, const TokenizedEssay& essay,
                                const TokenizedEssay& span, const InjectPosition& position);

// ---------------------------------------------------------------------------
// Corpus-level battery

struct BatterySpec {
  std::string strategy;  // delete-least | delete-random | add-top | word-soup |
                         // shuffle-sentences | shuffle-words | swap-synonyms | inject-span
  Schedule schedule{{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9}, true};
  double word_soup_fraction = 0.4;
  double top_fraction = 0.1;
  double bottom_fraction = 0.1;
  TokenizedEssay span;
  InjectPosition position = InjectPosition::begin();
  std::uint64_t seed = 0;
  IgConfig ig;
  int threads = 1;
};

struct BatteryRun {
  std::string strategy;
  std::uint64_t seed = 0;
  std::vector<PerturbationOutcome> outcomes;
  std::vector<std::size_t> essay_index;  // parallel to outcomes
  std::vector<std::string> skipped;      // "essay_id: reason"
};

BatteryRun run_battery(const Scorer& scorer, const EmbeddingTable& table,
                       const LabeledCorpus& corpus, const BatterySpec& spec);

}  // namespace essaylens
