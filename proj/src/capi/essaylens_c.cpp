#include "essaylens.h"

#include <cstring>
#include <exception>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "../core/attribution.hpp"
#include "../core/common.hpp"
#include "../core/corpus.hpp"
#include "../core/embedding.hpp"
#include "../core/metrics.hpp"
#include "../core/perturb.hpp"
#include "../core/report.hpp"
#include "../core/scorer.hpp"

using namespace essaylens;

namespace {

thread_local std::string g_last_error;

el_status fail(el_status code, const std::string& message) {
  g_last_error = message;
  return code;
}

template <typename Fn>
el_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return EL_OK;
  } catch (const InvalidInputError& e) {
    return fail(EL_ERR_INVALID_ARGUMENT, e.what());
  } catch (const ParseError& e) {
    return fail(EL_ERR_PARSE, e.what());
  } catch (const IoError& e) {
    return fail(EL_ERR_IO, e.what());
  } catch (const EmptyEssayError& e) {
    return fail(EL_ERR_EMPTY_ESSAY, e.what());
  } catch (const UnknownWordError& e) {
    return fail(EL_ERR_UNKNOWN_WORD, e.what());
  } catch (const OutOfRangeError& e) {
    return fail(EL_ERR_OUT_OF_RANGE, e.what());
  } catch (const DivergedError& e) {
    return fail(EL_ERR_DIVERGED, e.what());
  } catch (const CompletenessViolation& e) {
    return fail(EL_ERR_COMPLETENESS, e.what());
  } catch (const NotApplicableError& e) {
    return fail(EL_ERR_NOT_APPLICABLE, e.what());
  } catch (const AllTokensRemovedError& e) {
    return fail(EL_ERR_NOT_APPLICABLE, e.what());
  } catch (const Error& e) {
    return fail(EL_ERR_INTERNAL, e.what());
  } catch (const std::exception& e) {
    return fail(EL_ERR_INTERNAL, e.what());
  }
}

el_status require(bool ok, const char* message) {
  return ok ? EL_OK : fail(EL_ERR_INVALID_ARGUMENT, message);
}

IgConfig to_config(const el_ig_options* options) {
  IgConfig config;
  if (options) {
    config.steps = options->steps == 0 ? 50 : options->steps;
    config.rule = options->rule ? parse_rule(options->rule) : QuadratureRule::Midpoint;
    config.completeness_tolerance = options->tolerance > 0.0 ? options->tolerance : 0.05;
  }
  return config;
}

int threads_of(const el_ig_options* options) {
  return options && options->threads > 0 ? options->threads : 1;
}

}  // namespace

struct el_corpus {
  LabeledCorpus corpus;
};

struct el_embeddings {
  EmbeddingTable table{1};
  std::vector<std::string> warnings;
};

struct el_scorer {
  std::unique_ptr<Scorer> scorer;
};

struct el_attributions {
  LabeledCorpus corpus;  // tokens and ids for the artifacts
  CorpusAttribution result;
};

struct el_outcomes {
  LabeledCorpus corpus;
  BatteryRun run;
};

extern "C" {

const char* el_version(void) { return "essaylens 1.0.0"; }

const char* el_last_error(void) { return g_last_error.c_str(); }

/* ------------------------------------------------------------------ corpus */

el_status el_corpus_load(const char* corpus_path, const char* rubric_path, el_corpus** out) {
  if (el_status s = require(corpus_path && rubric_path && out, "el_corpus_load: null argument"))
    return s;
  return guarded([&]() {
    auto handle = std::make_unique<el_corpus>();
    handle->corpus = load_corpus(corpus_path, rubric_path);
    *out = handle.release();
  });
}

el_status el_corpus_save(const el_corpus* corpus, const char* corpus_path) {
  if (el_status s = require(corpus && corpus_path, "el_corpus_save: null argument")) return s;
  return guarded([&]() { save_corpus(corpus->corpus, corpus_path); });
}

el_status el_corpus_save_rubrics(const el_corpus* corpus, const char* rubric_path) {
  if (el_status s = require(corpus && rubric_path, "el_corpus_save_rubrics: null argument"))
    return s;
  return guarded([&]() { save_rubrics(corpus->corpus.rubrics, rubric_path); });
}

el_status el_corpus_synthetic(const el_embeddings* vocabulary, uint64_t seed, size_t n_essays,
                              const char* const* keywords, const double* keyword_weights,
                              size_t n_keywords, double length_coeff, const char* prompt_id,
                              long min_score, long max_score, size_t min_words, size_t max_words,
                              int punctuate, el_corpus** out) {
  if (el_status s = require(vocabulary && prompt_id && out && (n_keywords == 0 || (keywords && keyword_weights)),
                            "el_corpus_synthetic: null argument"))
    return s;
  return guarded([&]() {
    SyntheticSpec spec;
    spec.seed = seed;
    spec.n_essays = n_essays;
    for (size_t i = 0; i < n_keywords; ++i) {
      if (!keywords[i]) throw InvalidInputError("el_corpus_synthetic: null keyword");
      spec.keyword_weights[keywords[i]] = keyword_weights[i];
    }
    spec.length_coeff = length_coeff;
    spec.rubric = Rubric{prompt_id, min_score, max_score};
    spec.min_words = min_words;
    spec.max_words = max_words;
    spec.punctuate = punctuate != 0;
    auto handle = std::make_unique<el_corpus>();
    handle->corpus = generate_synthetic_corpus(spec, vocabulary->table.words());
    *out = handle.release();
  });
}

size_t el_corpus_size(const el_corpus* corpus) { return corpus ? corpus->corpus.size() : 0; }

const char* el_corpus_essay_id(const el_corpus* corpus, size_t index) {
  if (!corpus || index >= corpus->corpus.size()) return nullptr;
  return corpus->corpus.essays[index].essay.essay_id.c_str();
}

const char* el_corpus_prompt_id(const el_corpus* corpus, size_t index) {
  if (!corpus || index >= corpus->corpus.size()) return nullptr;
  return corpus->corpus.essays[index].essay.prompt_id.c_str();
}

el_status el_corpus_human_score(const el_corpus* corpus, size_t index, long* out) {
  if (el_status s = require(corpus && out, "el_corpus_human_score: null argument")) return s;
  if (index >= corpus->corpus.size()) {
    return fail(EL_ERR_OUT_OF_RANGE, "el_corpus_human_score: index out of range");
  }
  *out = corpus->corpus.essays[index].human_score;
  return EL_OK;
}

el_status el_corpus_token_count(const el_corpus* corpus, size_t index, size_t* out) {
  if (el_status s = require(corpus && out, "el_corpus_token_count: null argument")) return s;
  if (index >= corpus->corpus.size()) {
    return fail(EL_ERR_OUT_OF_RANGE, "el_corpus_token_count: index out of range");
  }
  *out = corpus->corpus.essays[index].essay.size();
  return EL_OK;
}

const char* el_corpus_token(const el_corpus* corpus, size_t index, size_t token) {
  if (!corpus || index >= corpus->corpus.size()) return nullptr;
  const auto& tokens = corpus->corpus.essays[index].essay.tokens;
  if (token >= tokens.size()) return nullptr;
  return tokens[token].c_str();
}

el_status el_corpus_rubric(const el_corpus* corpus, const char* prompt_id, long* min_score,
                           long* max_score) {
  if (el_status s = require(corpus && prompt_id && min_score && max_score,
                            "el_corpus_rubric: null argument"))
    return s;
  return guarded([&]() {
    const Rubric& r = corpus->corpus.rubric_for(prompt_id);
    *min_score = r.min_score;
    *max_score = r.max_score;
  });
}

void el_corpus_free(el_corpus* corpus) { delete corpus; }

/* -------------------------------------------------------------- embeddings */

el_status el_embeddings_load(const char* path, el_embeddings** out) {
  if (el_status s = require(path && out, "el_embeddings_load: null argument")) return s;
  return guarded([&]() {
    auto handle = std::make_unique<el_embeddings>();
    EmbeddingLoadResult loaded = load_embeddings(path);
    handle->table = std::move(loaded.table);
    handle->warnings = std::move(loaded.warnings);
    *out = handle.release();
  });
}

el_status el_embeddings_save(const el_embeddings* table, const char* path) {
  if (el_status s = require(table && path, "el_embeddings_save: null argument")) return s;
  return guarded([&]() { save_embeddings(table->table, path); });
}

el_status el_embeddings_random(const char* const* words, size_t n_words, size_t dim,
                               uint64_t seed, double stddev, el_embeddings** out) {
  if (el_status s = require(words && out && n_words > 0, "el_embeddings_random: null argument"))
    return s;
  return guarded([&]() {
    std::vector<std::string> list;
    list.reserve(n_words);
    for (size_t i = 0; i < n_words; ++i) {
      if (!words[i]) throw InvalidInputError("el_embeddings_random: null word");
      list.emplace_back(words[i]);
    }
    auto handle = std::make_unique<el_embeddings>();
    handle->table = random_embeddings(seed, list, dim, stddev > 0.0 ? stddev : 1.0);
    *out = handle.release();
  });
}

size_t el_embeddings_dim(const el_embeddings* table) { return table ? table->table.dim() : 0; }

size_t el_embeddings_size(const el_embeddings* table) { return table ? table->table.size() : 0; }

int el_embeddings_contains(const el_embeddings* table, const char* word) {
  return table && word && table->table.contains(word) ? 1 : 0;
}

size_t el_embeddings_warning_count(const el_embeddings* table) {
  return table ? table->warnings.size() : 0;
}

const char* el_embeddings_warning(const el_embeddings* table, size_t index) {
  if (!table || index >= table->warnings.size()) return nullptr;
  return table->warnings[index].c_str();
}

el_status el_embeddings_nearest(const el_embeddings* table, const char* word, int exclude_self,
                                const char** out_word) {
  if (el_status s = require(table && word && out_word, "el_embeddings_nearest: null argument"))
    return s;
  return guarded([&]() {
    thread_local std::string result;
    result = nearest_neighbor(word, table->table, exclude_self != 0);
    *out_word = result.c_str();
  });
}

void el_embeddings_free(el_embeddings* table) { delete table; }

/* ------------------------------------------------------------------ scorer */

el_status el_scorer_create(const char* kind, size_t dim, size_t hidden, uint64_t seed,
                           el_scorer** out) {
  if (el_status s = require(kind && out, "el_scorer_create: null argument")) return s;
  return guarded([&]() {
    auto handle = std::make_unique<el_scorer>();
    handle->scorer = make_scorer(kind, dim, hidden == 0 ? 16 : hidden, seed);
    *out = handle.release();
  });
}

el_status el_scorer_load(const char* checkpoint_path, el_scorer** out) {
  if (el_status s = require(checkpoint_path && out, "el_scorer_load: null argument")) return s;
  return guarded([&]() {
    auto handle = std::make_unique<el_scorer>();
    handle->scorer = load_checkpoint(checkpoint_path);
    *out = handle.release();
  });
}

el_status el_scorer_save(const el_scorer* scorer, const char* checkpoint_path) {
  if (el_status s = require(scorer && checkpoint_path, "el_scorer_save: null argument")) return s;
  return guarded([&]() { save_checkpoint(*scorer->scorer, checkpoint_path); });
}

const char* el_scorer_kind(const el_scorer* scorer) {
  if (!scorer) return nullptr;
  thread_local std::string kind;
  kind = scorer->scorer->kind();
  return kind.c_str();
}

size_t el_scorer_dim(const el_scorer* scorer) {
  return scorer ? scorer->scorer->embedding_dim() : 0;
}

el_status el_scorer_train(el_scorer* scorer, const el_corpus* corpus, const el_embeddings* table,
                          size_t epochs, double learning_rate, size_t batch_size, uint64_t seed,
                          double* loss_history, double* final_loss) {
  if (el_status s = require(scorer && corpus && table, "el_scorer_train: null argument")) return s;
  return guarded([&]() {
    TrainOptions options;
    options.epochs = epochs;
    options.learning_rate = learning_rate;
    options.batch_size = batch_size;
    options.seed = seed;
    const TrainResult result = train(*scorer->scorer, corpus->corpus, table->table, options);
    if (loss_history) {
      for (size_t i = 0; i < result.loss_history.size(); ++i) {
        loss_history[i] = result.loss_history[i];
      }
    }
    if (final_loss) *final_loss = result.loss_history.back();
  });
}

el_status el_scorer_score(const el_scorer* scorer, const el_corpus* corpus,
                          const el_embeddings* table, size_t index, double* raw, double* scaled) {
  if (el_status s = require(scorer && corpus && table, "el_scorer_score: null argument")) return s;
  if (index >= corpus->corpus.size()) {
    return fail(EL_ERR_OUT_OF_RANGE, "el_scorer_score: index out of range");
  }
  return guarded([&]() {
    const auto& entry = corpus->corpus.essays[index];
    const Rubric& rubric = corpus->corpus.rubric_for(entry.essay.prompt_id);
    const ScaledScore score =
        score_essay(*scorer->scorer, embed(entry.essay, table->table), rubric);
    if (raw) *raw = score.raw;
    if (scaled) *scaled = score.scaled;
  });
}

el_status el_scores_write_csv(const el_scorer* scorer, const el_corpus* corpus,
                              const el_embeddings* table, const char* csv_path) {
  if (el_status s = require(scorer && corpus && table && csv_path,
                            "el_scores_write_csv: null argument"))
    return s;
  return guarded([&]() {
    std::vector<ScaledScore> scores;
    scores.reserve(corpus->corpus.size());
    for (const auto& entry : corpus->corpus.essays) {
      const Rubric& rubric = corpus->corpus.rubric_for(entry.essay.prompt_id);
      scores.push_back(score_essay(*scorer->scorer, embed(entry.essay, table->table), rubric));
    }
    write_scores_csv(csv_path, corpus->corpus, scores);
  });
}

el_status el_loss_write_csv(const double* loss_history, size_t n_entries, const char* csv_path) {
  if (el_status s = require(loss_history && csv_path && n_entries > 0,
                            "el_loss_write_csv: null argument"))
    return s;
  return guarded([&]() {
    write_loss_csv(csv_path, std::vector<double>(loss_history, loss_history + n_entries));
  });
}

void el_scorer_free(el_scorer* scorer) { delete scorer; }

/* ------------------------------------------------------------- attribution */

void el_ig_options_default(el_ig_options* options) {
  if (!options) return;
  options->steps = 50;
  options->rule = "midpoint";
  options->tolerance = 0.05;
  options->threads = 1;
}

el_status el_attribute(const el_scorer* scorer, const el_corpus* corpus,
                       const el_embeddings* table, const el_ig_options* options,
                       el_attributions** out) {
  if (el_status s = require(scorer && corpus && table && out, "el_attribute: null argument"))
    return s;
  return guarded([&]() {
    auto handle = std::make_unique<el_attributions>();
    handle->corpus = corpus->corpus;
    handle->result = attribute_corpus(*scorer->scorer, corpus->corpus, table->table,
                                      to_config(options), threads_of(options));
    *out = handle.release();
  });
}

size_t el_attributions_count(const el_attributions* attrs) {
  return attrs ? attrs->result.vectors.size() : 0;
}

el_status el_attributions_values(const el_attributions* attrs, size_t index,
                                 const double** values, size_t* n_tokens) {
  if (el_status s = require(attrs && values && n_tokens, "el_attributions_values: null argument"))
    return s;
  if (index >= attrs->result.vectors.size()) {
    return fail(EL_ERR_OUT_OF_RANGE, "el_attributions_values: index out of range");
  }
  *values = attrs->result.vectors[index].per_token.data();
  *n_tokens = attrs->result.vectors[index].per_token.size();
  return EL_OK;
}

el_status el_attributions_completeness(const el_attributions* attrs, size_t index,
                                       double* error) {
  if (el_status s = require(attrs && error, "el_attributions_completeness: null argument"))
    return s;
  if (index >= attrs->result.vectors.size()) {
    return fail(EL_ERR_OUT_OF_RANGE, "el_attributions_completeness: index out of range");
  }
  *error = attrs->result.vectors[index].completeness_error;
  return EL_OK;
}

el_status el_attributions_scaled_score(const el_attributions* attrs, size_t index,
                                       double* scaled) {
  if (el_status s = require(attrs && scaled, "el_attributions_scaled_score: null argument"))
    return s;
  if (index >= attrs->result.scores.size()) {
    return fail(EL_ERR_OUT_OF_RANGE, "el_attributions_scaled_score: index out of range");
  }
  *scaled = attrs->result.scores[index].scaled;
  return EL_OK;
}

size_t el_attributions_violations(const el_attributions* attrs) {
  return attrs ? attrs->result.violation_indices.size() : 0;
}

el_status el_attributions_write_json(const el_attributions* attrs, const char* json_path) {
  if (el_status s = require(attrs && json_path, "el_attributions_write_json: null argument"))
    return s;
  return guarded([&]() { write_attribution_json(json_path, attrs->corpus, attrs->result); });
}

el_status el_attributions_write_word_stats_csv(const el_attributions* attrs,
                                               const char* csv_path) {
  if (el_status s = require(attrs && csv_path,
                            "el_attributions_write_word_stats_csv: null argument"))
    return s;
  return guarded([&]() { write_word_stats_csv(csv_path, attrs->result.word_stats); });
}

el_status el_attributions_write_heatmaps(const el_attributions* attrs, const char* out_dir) {
  if (el_status s = require(attrs && out_dir, "el_attributions_write_heatmaps: null argument"))
    return s;
  return guarded([&]() {
    const std::string dir(out_dir);
    const std::string json_path = dir + "/attributions.json";
    write_attribution_json(json_path, attrs->corpus, attrs->result);
    render_report_dir(dir, json_path);
  });
}

void el_attributions_free(el_attributions* attrs) { delete attrs; }

/* ----------------------------------------------------------- perturbations */

void el_perturb_options_default(el_perturb_options* options) {
  if (!options) return;
  options->strategy = nullptr;
  options->fractions = nullptr;
  options->n_fractions = 0;
  options->recompute = 1;
  options->word_soup_fraction = 0.4;
  options->top_fraction = 0.1;
  options->bottom_fraction = 0.1;
  options->span_file = nullptr;
  options->position = "begin";
  options->seed = 0;
  el_ig_options_default(&options->ig);
}

el_status el_perturb(const el_scorer* scorer, const el_corpus* corpus,
                     const el_embeddings* table, const el_perturb_options* options,
                     el_outcomes** out) {
  if (el_status s = require(scorer && corpus && table && options && options->strategy && out,
                            "el_perturb: null argument"))
    return s;
  return guarded([&]() {
    BatterySpec spec;
    spec.strategy = options->strategy;
    if (options->fractions && options->n_fractions > 0) {
      spec.schedule.fractions.assign(options->fractions,
                                     options->fractions + options->n_fractions);
    }
    spec.schedule.recompute = options->recompute != 0;
    spec.word_soup_fraction = options->word_soup_fraction;
    spec.top_fraction = options->top_fraction;
    spec.bottom_fraction = options->bottom_fraction;
    if (options->span_file) {
      std::ifstream in(options->span_file);
      if (!in) throw IoError(std::string("cannot open span file ") + options->span_file);
      std::stringstream buffer;
      buffer << in.rdbuf();
      spec.span = tokenize(buffer.str());
      spec.span.essay_id = options->span_file;
    }
    if (options->position) spec.position = InjectPosition::parse(options->position);
    spec.seed = options->seed;
    spec.ig = to_config(&options->ig);
    spec.threads = options->ig.threads > 0 ? options->ig.threads : 1;

    auto handle = std::make_unique<el_outcomes>();
    handle->corpus = corpus->corpus;
    handle->run = run_battery(*scorer->scorer, table->table, corpus->corpus, spec);
    *out = handle.release();
  });
}

size_t el_outcomes_count(const el_outcomes* outcomes) {
  return outcomes ? outcomes->run.outcomes.size() : 0;
}

const char* el_outcomes_strategy(const el_outcomes* outcomes) {
  return outcomes ? outcomes->run.strategy.c_str() : nullptr;
}

el_status el_outcomes_essay_index(const el_outcomes* outcomes, size_t index, size_t* out) {
  if (el_status s = require(outcomes && out, "el_outcomes_essay_index: null argument")) return s;
  if (index >= outcomes->run.outcomes.size()) {
    return fail(EL_ERR_OUT_OF_RANGE, "el_outcomes_essay_index: index out of range");
  }
  *out = outcomes->run.essay_index[index];
  return EL_OK;
}

el_status el_outcomes_fraction(const el_outcomes* outcomes, size_t index, double* out) {
  if (el_status s = require(outcomes && out, "el_outcomes_fraction: null argument")) return s;
  if (index >= outcomes->run.outcomes.size()) {
    return fail(EL_ERR_OUT_OF_RANGE, "el_outcomes_fraction: index out of range");
  }
  *out = outcomes->run.outcomes[index].strategy.fraction;
  return EL_OK;
}

el_status el_outcomes_original_score(const el_outcomes* outcomes, size_t index, double* scaled) {
  if (el_status s = require(outcomes && scaled, "el_outcomes_original_score: null argument"))
    return s;
  if (index >= outcomes->run.outcomes.size()) {
    return fail(EL_ERR_OUT_OF_RANGE, "el_outcomes_original_score: index out of range");
  }
  *scaled = outcomes->run.outcomes[index].original.score.scaled;
  return EL_OK;
}

el_status el_outcomes_perturbed_score(const el_outcomes* outcomes, size_t index, double* scaled) {
  if (el_status s = require(outcomes && scaled, "el_outcomes_perturbed_score: null argument"))
    return s;
  if (index >= outcomes->run.outcomes.size()) {
    return fail(EL_ERR_OUT_OF_RANGE, "el_outcomes_perturbed_score: index out of range");
  }
  *scaled = outcomes->run.outcomes[index].perturbed.score.scaled;
  return EL_OK;
}

size_t el_outcomes_skipped(const el_outcomes* outcomes) {
  return outcomes ? outcomes->run.skipped.size() : 0;
}

el_status el_outcomes_write_json(const el_outcomes* outcomes, const char* json_path) {
  if (el_status s = require(outcomes && json_path, "el_outcomes_write_json: null argument"))
    return s;
  return guarded([&]() { write_outcomes_json(json_path, outcomes->corpus, outcomes->run); });
}

void el_outcomes_free(el_outcomes* outcomes) { delete outcomes; }

/* ----------------------------------------------------------------- metrics */

el_status el_qwk(const long* rater_a, const long* rater_b, size_t n, long min_score,
                 long max_score, double* out) {
  if (el_status s = require(rater_a && rater_b && out, "el_qwk: null argument")) return s;
  return guarded([&]() {
    Rubric rubric{"", min_score, max_score};
    if (min_score >= max_score) throw InvalidInputError("el_qwk: rubric min must be below max");
    *out = qwk(std::vector<long>(rater_a, rater_a + n), std::vector<long>(rater_b, rater_b + n),
               rubric);
  });
}

el_status el_impact_stats(const double* original, const double* perturbed, size_t n,
                          long min_score, long max_score, double out[5]) {
  if (el_status s = require(original && perturbed && out, "el_impact_stats: null argument"))
    return s;
  return guarded([&]() {
    Rubric rubric{"", min_score, max_score};
    if (min_score >= max_score) {
      throw InvalidInputError("el_impact_stats: rubric min must be below max");
    }
    const ImpactStats stats =
        impact_stats(std::vector<double>(original, original + n),
                     std::vector<double>(perturbed, perturbed + n), rubric);
    out[0] = stats.mu_pos;
    out[1] = stats.mu_neg;
    out[2] = stats.n_pos;
    out[3] = stats.n_neg;
    out[4] = stats.sigma;
  });
}

el_status el_impact_report(const char* outcomes_json_path, const char* csv_path,
                           const char* json_path) {
  if (el_status s = require(outcomes_json_path && csv_path, "el_impact_report: null argument"))
    return s;
  return guarded([&]() {
    write_impact_report(csv_path, json_path ? json_path : "", outcomes_json_path);
  });
}

el_status el_curve_csv(const el_scorer* scorer, const el_corpus* corpus,
                       const el_embeddings* table, const char* mode, const double* fractions,
                       size_t n_fractions, uint64_t seed, const el_ig_options* options,
                       const char* csv_path) {
  if (el_status s = require(scorer && corpus && table && mode && csv_path,
                            "el_curve_csv: null argument"))
    return s;
  return guarded([&]() {
    Schedule schedule;
    if (fractions && n_fractions > 0) {
      schedule.fractions.assign(fractions, fractions + n_fractions);
    } else {
      schedule.fractions = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
    }
    const CurveMode curve_mode = parse_curve_mode(mode);
    const IgConfig config = to_config(options);
    const int threads = threads_of(options);

    // One curve per prompt, emitted into a single CSV.
    std::vector<std::pair<std::string, std::vector<CurvePoint>>> per_prompt;
    for (const auto& [prompt, rubric] : corpus->corpus.rubrics) {
      LabeledCorpus sub;
      sub.rubrics = corpus->corpus.rubrics;
      for (const auto& entry : corpus->corpus.essays) {
        if (entry.essay.prompt_id == prompt) sub.essays.push_back(entry);
      }
      if (sub.essays.empty()) continue;
      per_prompt.emplace_back(prompt,
                              relative_qwk_curve(*scorer->scorer, table->table, sub, rubric,
                                                 curve_mode, schedule, seed, config, threads));
    }
    if (per_prompt.empty()) throw InvalidInputError("curve: corpus has no essays");
    write_curve_csv_multi(csv_path, per_prompt, curve_mode_name(curve_mode));
  });
}

el_status el_recovery_csv(const el_scorer* scorer, const el_corpus* corpus,
                          const el_embeddings* table, double tolerance,
                          const el_ig_options* options, const char* csv_path,
                          double* mean_fraction) {
  if (el_status s = require(scorer && corpus && table && csv_path,
                            "el_recovery_csv: null argument"))
    return s;
  return guarded([&]() {
    const IgConfig config = to_config(options);
    std::vector<double> fractions(corpus->corpus.size());
    parallel_for(corpus->corpus.size(), threads_of(options), [&](std::size_t i) {
      const auto& entry = corpus->corpus.essays[i];
      PerturbContext ctx{scorer->scorer.get(), &table->table,
                         corpus->corpus.rubric_for(entry.essay.prompt_id), config};
      fractions[i] = recovery_fraction(ctx, entry.essay, tolerance);
    });
    write_recovery_csv(csv_path, corpus->corpus, fractions, tolerance);
    if (mean_fraction) {
      double total = 0.0;
      for (double f : fractions) total += f;
      *mean_fraction = fractions.empty() ? 0.0 : total / static_cast<double>(fractions.size());
    }
  });
}

/* ------------------------------------------------------------------ report */

el_status el_report_render(const char* attribution_json_path, const char* curve_csv_path,
                           const char* out_dir) {
  if (el_status s = require(attribution_json_path && out_dir, "el_report_render: null argument"))
    return s;
  return guarded([&]() {
    render_report_dir(out_dir, attribution_json_path, curve_csv_path ? curve_csv_path : "");
  });
}

}  // extern "C"
