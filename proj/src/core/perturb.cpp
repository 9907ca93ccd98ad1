#include "perturb.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>

namespace essaylens {

namespace {

std::string fraction_text(double f) { return format_double(f); }

TokenizedEssay subset_essay(const TokenizedEssay& original,
                            const std::vector<std::size_t>& kept_ascending) {
  TokenizedEssay out;
  out.essay_id = original.essay_id;
  out.prompt_id = original.prompt_id;
  out.tokens.reserve(kept_ascending.size());
  out.positions.reserve(kept_ascending.size());
  for (std::size_t idx : kept_ascending) {
    out.tokens.push_back(original.tokens[idx]);
    out.positions.push_back(original.positions[idx]);
  }
  out.sentence_spans = sentence_spans_for(out.tokens);
  return out;
}

std::vector<long> identity_map(std::size_t n) {
  std::vector<long> map(n);
  for (std::size_t i = 0; i < n; ++i) map[i] = static_cast<long>(i);
  return map;
}

std::vector<long> map_from_indices(const std::vector<std::size_t>& indices) {
  std::vector<long> map(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) map[i] = static_cast<long>(indices[i]);
  return map;
}

PerturbationOutcome assemble_outcome(const PerturbContext& ctx, const EssayEvaluation& original,
                                     TokenizedEssay perturbed, StrategyInfo strategy,
                                     std::optional<std::uint64_t> seed,
                                     std::vector<long> index_map,
                                     std::vector<std::size_t> injected = {}) {
  PerturbationOutcome outcome;
  outcome.strategy = std::move(strategy);
  outcome.seed = seed;
  outcome.original = original;
  outcome.perturbed = evaluate_essay(ctx, perturbed);
  outcome.index_map = std::move(index_map);
  outcome.injected = std::move(injected);
  return outcome;
}

void require_min_tokens(const TokenizedEssay& essay, std::size_t minimum, const char* what) {
  if (essay.size() < minimum) {
    throw NotApplicableError(std::string(what) + " needs at least " + std::to_string(minimum) +
                             " tokens, essay \"" + essay.essay_id + "\" has " +
                             std::to_string(essay.size()));
  }
}

// Sorted survivor list after removing `removed` original indices.
std::vector<std::size_t> survivors_of(std::size_t n, const std::set<std::size_t>& removed) {
  std::vector<std::size_t> kept;
  kept.reserve(n - removed.size());
  for (std::size_t i = 0; i < n; ++i) {
    if (!removed.count(i)) kept.push_back(i);
  }
  return kept;
}

}  // namespace

void Schedule::validate() const {
  if (fractions.empty()) throw InvalidInputError("schedule needs at least one fraction");
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    const double f = fractions[i];
    if (f <= 0.0 || f > 1.0) {
      throw InvalidInputError("schedule fractions must lie in (0, 1], got " + fraction_text(f));
    }
    if (i > 0 && f <= fractions[i - 1]) {
      throw InvalidInputError("schedule fractions must be strictly ascending");
    }
  }
}

EssayEvaluation evaluate_essay(const PerturbContext& ctx, const TokenizedEssay& essay) {
  EssayEvaluation eval;
  eval.essay = essay;
  if (essay.empty()) {
    // An empty essay scores the rubric minimum and attributes nothing.
    eval.score = scale_score(0.0, ctx.rubric);
    eval.attribution.config = ctx.ig;
    return eval;
  }
  const EmbeddedEssay embedded = embed(essay, *ctx.table);
  eval.score = score_essay(*ctx.scorer, embedded, ctx.rubric);
  eval.attribution = integrated_gradients_unchecked(*ctx.scorer, embedded, ctx.ig);
  eval.completeness_ok = eval.attribution.completeness_error <= ctx.ig.completeness_tolerance;
  return eval;
}

// ---------------------------------------------------------------------------
// Deletion

namespace {

ScheduleRun run_deletion(const PerturbContext& ctx, const TokenizedEssay& essay,
                         const Schedule& schedule, const std::string& name,
                         std::optional<std::uint64_t> seed, bool recompute_ranking,
                         const std::vector<std::size_t>* fixed_removal_order) {
  schedule.validate();
  require_min_tokens(essay, 2, name.c_str());

  const std::size_t n = essay.size();
  const EssayEvaluation original = evaluate_essay(ctx, essay);

  ScheduleRun run;
  std::set<std::size_t> removed;

  // Frozen ranking for the one-shot mode: removal sets are nested tails.
  std::vector<std::size_t> frozen_order;
  if (!fixed_removal_order && !recompute_ranking) {
    frozen_order = rank(original.attribution).order;
  }

  for (double f : schedule.fractions) {
    const std::size_t target = fraction_count(f, n);
    if (target >= n) {
      run.skipped.emplace_back(f, "fraction " + fraction_text(f) + " would remove all tokens");
      continue;
    }
    if (fixed_removal_order) {
      removed.clear();
      removed.insert(fixed_removal_order->begin(),
                     fixed_removal_order->begin() + static_cast<std::ptrdiff_t>(target));
    } else if (!recompute_ranking) {
      removed.clear();
      removed.insert(frozen_order.end() - static_cast<std::ptrdiff_t>(target),
                     frozen_order.end());
    } else {
      while (removed.size() < target) {
        const std::size_t need = target - removed.size();
        const std::vector<std::size_t> current = survivors_of(n, removed);
        const TokenizedEssay current_essay = subset_essay(essay, current);
        const AttributionRanking ranking =
            rank(integrated_gradients_unchecked(*ctx.scorer, embed(current_essay, *ctx.table),
                                                ctx.ig));
        for (std::size_t k = 0; k < need; ++k) {
          const std::size_t within = ranking.order[ranking.order.size() - 1 - k];
          removed.insert(current[within]);
        }
      }
    }
    const std::vector<std::size_t> kept = survivors_of(n, removed);
    StrategyInfo info{name, f, {{"recompute", recompute_ranking ? "true" : "false"}}};
    run.outcomes.push_back(assemble_outcome(ctx, original, subset_essay(essay, kept),
                                            std::move(info), seed, map_from_indices(kept)));
  }
  return run;
}

}  // namespace

ScheduleRun delete_least(const PerturbContext& ctx, const TokenizedEssay& essay,
                         const Schedule& schedule) {
  return run_deletion(ctx, essay, schedule, "delete-least", std::nullopt, schedule.recompute,
                      nullptr);
}

ScheduleRun delete_random(const PerturbContext& ctx, const TokenizedEssay& essay,
                          const Schedule& schedule, std::uint64_t seed) {
  schedule.validate();
  require_min_tokens(essay, 2, "delete-random");
  std::vector<std::size_t> order(essay.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);
  return run_deletion(ctx, essay, schedule, "delete-random", seed, false, &order);
}

PerturbationOutcome delete_least_at(const PerturbContext& ctx, const TokenizedEssay& essay,
                                    double fraction) {
  require_min_tokens(essay, 2, "delete-least");
  if (fraction < 0.0 || fraction > 1.0) {
    throw InvalidInputError("deletion fraction must lie in [0, 1]");
  }
  const EssayEvaluation original = evaluate_essay(ctx, essay);
  const std::size_t n = essay.size();
  const std::size_t target = fraction_count(fraction, n);
  if (target >= n) {
    throw AllTokensRemovedError("fraction " + fraction_text(fraction) +
                                " would remove all tokens");
  }
  const std::vector<std::size_t> order = rank(original.attribution).order;
  std::set<std::size_t> removed(order.end() - static_cast<std::ptrdiff_t>(target), order.end());
  const std::vector<std::size_t> kept = survivors_of(n, removed);
  StrategyInfo info{"delete-least", fraction, {{"recompute", "false"}}};
  return assemble_outcome(ctx, original, subset_essay(essay, kept), std::move(info), std::nullopt,
                          map_from_indices(kept));
}

// ---------------------------------------------------------------------------
// Addition

namespace {

PerturbationOutcome one_shot_add(const PerturbContext& ctx, const TokenizedEssay& essay,
                                 const EssayEvaluation& original,
                                 const std::vector<std::size_t>& ranking_order, double fraction,
                                 const std::string& name) {
  const std::size_t m = fraction_count(fraction, essay.size());
  std::vector<std::size_t> selected(ranking_order.begin(),
                                    ranking_order.begin() + static_cast<std::ptrdiff_t>(m));
  std::sort(selected.begin(), selected.end());
  StrategyInfo info{name, fraction, {}};
  return assemble_outcome(ctx, original, subset_essay(essay, selected), std::move(info),
                          std::nullopt, map_from_indices(selected));
}

}  // namespace

ScheduleRun add_top(const PerturbContext& ctx, const TokenizedEssay& essay,
                    const Schedule& schedule) {
  schedule.validate();
  require_min_tokens(essay, 2, "add-top");
  const EssayEvaluation original = evaluate_essay(ctx, essay);
  // Ranking is taken once from the full essay: the construction selects from
  // the original's attribution order at every fraction.
  const std::vector<std::size_t> order = rank(original.attribution).order;
  ScheduleRun run;
  for (double f : schedule.fractions) {
    run.outcomes.push_back(one_shot_add(ctx, essay, original, order, f, "add-top"));
  }
  return run;
}

PerturbationOutcome word_soup(const PerturbContext& ctx, const TokenizedEssay& essay,
                              double fraction) {
  require_min_tokens(essay, 2, "word-soup");
  if (fraction <= 0.0 || fraction > 1.0) {
    throw InvalidInputError("word-soup fraction must lie in (0, 1]");
  }
  const EssayEvaluation original = evaluate_essay(ctx, essay);
  const std::vector<std::size_t> order = rank(original.attribution).order;
  return one_shot_add(ctx, essay, original, order, fraction, "word-soup");
}

// ---------------------------------------------------------------------------
// Shuffles

PerturbationOutcome shuffle_sentences(const PerturbContext& ctx, const TokenizedEssay& essay,
                                      std::uint64_t seed) {
  if (essay.sentence_spans.size() < 2) {
    throw NotApplicableError("essay \"" + essay.essay_id + "\" has fewer than 2 sentences");
  }
  const EssayEvaluation original = evaluate_essay(ctx, essay);

  std::vector<std::size_t> perm(essay.sentence_spans.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  Rng rng(seed);
  rng.shuffle(perm);

  TokenizedEssay shuffled;
  shuffled.essay_id = essay.essay_id;
  shuffled.prompt_id = essay.prompt_id;
  std::vector<long> index_map;
  index_map.reserve(essay.size());
  for (std::size_t s : perm) {
    const auto [begin, end] = essay.sentence_spans[s];
    const std::size_t start = shuffled.tokens.size();
    for (std::size_t i = begin; i < end; ++i) {
      shuffled.tokens.push_back(essay.tokens[i]);
      index_map.push_back(static_cast<long>(i));
    }
    shuffled.sentence_spans.emplace_back(start, shuffled.tokens.size());
  }
  shuffled.positions.resize(shuffled.tokens.size());
  for (std::size_t i = 0; i < shuffled.positions.size(); ++i) shuffled.positions[i] = i;

  StrategyInfo info{"shuffle-sentences", -1.0, {}};
  return assemble_outcome(ctx, original, std::move(shuffled), std::move(info), seed,
                          std::move(index_map));
}

PerturbationOutcome shuffle_words(const PerturbContext& ctx, const TokenizedEssay& essay,
                                  std::uint64_t seed) {
  require_min_tokens(essay, 2, "shuffle-words");
  const EssayEvaluation original = evaluate_essay(ctx, essay);

  std::vector<std::size_t> perm(essay.size());
  for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  Rng rng(seed);
  rng.shuffle(perm);

  TokenizedEssay shuffled;
  shuffled.essay_id = essay.essay_id;
  shuffled.prompt_id = essay.prompt_id;
  shuffled.tokens.reserve(essay.size());
  std::vector<long> index_map;
  index_map.reserve(essay.size());
  for (std::size_t src : perm) {
    shuffled.tokens.push_back(essay.tokens[src]);
    index_map.push_back(static_cast<long>(src));
  }
  shuffled.positions.resize(shuffled.tokens.size());
  for (std::size_t i = 0; i < shuffled.positions.size(); ++i) shuffled.positions[i] = i;
  shuffled.sentence_spans = sentence_spans_for(shuffled.tokens);

  StrategyInfo info{"shuffle-words", -1.0, {}};
  return assemble_outcome(ctx, original, std::move(shuffled), std::move(info), seed,
                          std::move(index_map));
}

// ---------------------------------------------------------------------------
// Synonym swap

PerturbationOutcome swap_synonyms(const PerturbContext& ctx, const TokenizedEssay& essay,
                                  double top_fraction, double bottom_fraction) {
  if (top_fraction < 0.0 || top_fraction > 1.0 || bottom_fraction < 0.0 ||
      bottom_fraction > 1.0) {
    throw InvalidInputError("synonym-swap fractions must lie in [0, 1]");
  }
  require_min_tokens(essay, 1, "swap-synonyms");
  const EssayEvaluation original = evaluate_essay(ctx, essay);
  const AttributionRanking ranking = rank(original.attribution);

  std::set<std::size_t> selected;
  for (std::size_t i : ranking.top_fraction(top_fraction)) selected.insert(i);
  for (std::size_t i : ranking.bottom_fraction(bottom_fraction)) selected.insert(i);

  TokenizedEssay swapped = essay;
  std::size_t replaced = 0;
  std::size_t oov_skipped = 0;
  for (std::size_t idx : selected) {
    const std::string& word = essay.tokens[idx];
    if (ctx.table->contains(word) && ctx.table->size() >= 2) {
      swapped.tokens[idx] = nearest_neighbor(word, *ctx.table, true);
      ++replaced;
    } else {
      ++oov_skipped;
    }
  }

  StrategyInfo info{"swap-synonyms",
                    -1.0,
                    {{"top_fraction", fraction_text(top_fraction)},
                     {"bottom_fraction", fraction_text(bottom_fraction)},
                     {"replaced", std::to_string(replaced)},
                     {"oov_skipped", std::to_string(oov_skipped)}}};
  return assemble_outcome(ctx, original, std::move(swapped), std::move(info), std::nullopt,
                          identity_map(essay.size()));
}

// ---------------------------------------------------------------------------
// Span injection

InjectPosition InjectPosition::parse(const std::string& text) {
  if (text == "begin") return begin();
  if (text == "end") return end();
  std::size_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw InvalidInputError("inject position must be \"begin\", \"end\" or a token index, got \"" +
                            text + "\"");
  }
  return at(value);
}

std::string InjectPosition::describe() const {
  switch (kind) {
    case Kind::Begin: return "begin";
    case Kind::End: return "end";
    case Kind::Index: return "index:" + std::to_string(index);
  }
  return "begin";
}

PerturbationOutcome inject_span(const PerturbContext& ctx, const TokenizedEssay& essay,
                                const TokenizedEssay& span, const InjectPosition& position) {
  if (span.empty()) throw InvalidInputError("inject-span needs a non-empty span");
  require_min_tokens(essay, 1, "inject-span");
  const std::size_t n = essay.size();
  std::size_t at = 0;
  switch (position.kind) {
    case InjectPosition::Kind::Begin: at = 0; break;
    case InjectPosition::Kind::End: at = n; break;
    case InjectPosition::Kind::Index:
      if (position.index > n) {
        throw OutOfRangeError("inject position " + std::to_string(position.index) +
                              " is beyond essay length " + std::to_string(n));
      }
      at = position.index;
      break;
  }
  const EssayEvaluation original = evaluate_essay(ctx, essay);

  TokenizedEssay spliced;
  spliced.essay_id = essay.essay_id;
  spliced.prompt_id = essay.prompt_id;
  std::vector<long> index_map;
  std::vector<std::size_t> injected;
  spliced.tokens.reserve(n + span.size());
  for (std::size_t i = 0; i < at; ++i) {
    spliced.tokens.push_back(essay.tokens[i]);
    index_map.push_back(static_cast<long>(i));
  }
  for (std::size_t i = 0; i < span.size(); ++i) {
    injected.push_back(spliced.tokens.size());
    spliced.tokens.push_back(span.tokens[i]);
    index_map.push_back(-1);
  }
  for (std::size_t i = at; i < n; ++i) {
    spliced.tokens.push_back(essay.tokens[i]);
    index_map.push_back(static_cast<long>(i));
  }
  spliced.positions.resize(spliced.tokens.size());
  for (std::size_t i = 0; i < spliced.positions.size(); ++i) spliced.positions[i] = i;
  spliced.sentence_spans = sentence_spans_for(spliced.tokens);

  StrategyInfo info{"inject-span",
                    -1.0,
                    {{"position", position.describe()},
                     {"span_tokens", std::to_string(span.size())}}};
  return assemble_outcome(ctx, original, std::move(spliced), std::move(info), std::nullopt,
                          std::move(index_map), std::move(injected));
}

// ---------------------------------------------------------------------------
// Battery

BatteryRun run_battery(const Scorer& scorer, const EmbeddingTable& table,
                       const LabeledCorpus& corpus, const BatterySpec& spec) {
  if (corpus.essays.empty()) throw InvalidInputError("cannot run a battery on an empty corpus");

  static const std::set<std::string> known = {
      "delete-least",     "delete-random", "add-top",       "word-soup",
      "shuffle-sentences", "shuffle-words", "swap-synonyms", "inject-span"};
  if (!known.count(spec.strategy)) {
    throw InvalidInputError("unknown strategy \"" + spec.strategy + "\"");
  }
  if (spec.strategy == "inject-span" && spec.span.empty()) {
    throw InvalidInputError("inject-span needs a span");
  }

  // Pre-draw one seed per essay so results do not depend on thread timing.
  std::vector<std::uint64_t> essay_seeds(corpus.essays.size());
  Rng seeder(spec.seed);
  for (auto& s : essay_seeds) s = seeder.next();

  struct Slot {
    std::vector<PerturbationOutcome> outcomes;
    std::vector<std::string> skipped;
  };
  std::vector<Slot> slots(corpus.essays.size());

  parallel_for(corpus.essays.size(), spec.threads, [&](std::size_t i) {
    const TokenizedEssay& essay = corpus.essays[i].essay;
    PerturbContext ctx{&scorer, &table, corpus.rubric_for(essay.prompt_id), spec.ig};
    Slot& slot = slots[i];
    auto record_schedule = [&](ScheduleRun run) {
      for (auto& o : run.outcomes) slot.outcomes.push_back(std::move(o));
      for (const auto& [f, reason] : run.skipped) {
        slot.skipped.push_back(essay.essay_id + " @ " + fraction_text(f) + ": " + reason);
      }
    };
    try {
      if (spec.strategy == "delete-least") {
        record_schedule(delete_least(ctx, essay, spec.schedule));
      } else if (spec.strategy == "delete-random") {
        record_schedule(delete_random(ctx, essay, spec.schedule, essay_seeds[i]));
      } else if (spec.strategy == "add-top") {
        record_schedule(add_top(ctx, essay, spec.schedule));
      } else if (spec.strategy == "word-soup") {
        slot.outcomes.push_back(word_soup(ctx, essay, spec.word_soup_fraction));
      } else if (spec.strategy == "shuffle-sentences") {
        slot.outcomes.push_back(shuffle_sentences(ctx, essay, essay_seeds[i]));
      } else if (spec.strategy == "shuffle-words") {
        slot.outcomes.push_back(shuffle_words(ctx, essay, essay_seeds[i]));
      } else if (spec.strategy == "swap-synonyms") {
        slot.outcomes.push_back(
            swap_synonyms(ctx, essay, spec.top_fraction, spec.bottom_fraction));
      } else if (spec.strategy == "inject-span") {
        slot.outcomes.push_back(inject_span(ctx, essay, spec.span, spec.position));
      }
    } catch (const NotApplicableError& e) {
      slot.skipped.push_back(essay.essay_id + ": " + e.what());
    }
  });

  BatteryRun run;
  run.strategy = spec.strategy;
  run.seed = spec.seed;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    for (auto& o : slots[i].outcomes) {
      run.outcomes.push_back(std::move(o));
      run.essay_index.push_back(i);
    }
    for (auto& s : slots[i].skipped) run.skipped.push_back(std::move(s));
  }
  return run;
}

}  // namespace essaylens
