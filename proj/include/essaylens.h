/* essaylens - integrated-gradients attribution and perturbation testing for
 * differentiable text scorers.
 *
 * C API of the shared library. All functions return el_status; EL_OK means
 * success and anything else leaves a human-readable message retrievable via
 * el_last_error() (thread-local). Objects are opaque handles freed with their
 * matching el_*_free function. Strings returned by handle accessors point
 * into the handle and stay valid until it is freed; strings returned through
 * out-parameters (el_embeddings_nearest) and el_scorer_kind/el_last_error
 * stay valid until the next API call on the same thread.
 */

#ifndef ESSAYLENS_H
#define ESSAYLENS_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define EL_API __declspec(dllexport)
#else
#define EL_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum el_status {
  EL_OK = 0,
  EL_ERR_INVALID_ARGUMENT = 1,
  EL_ERR_PARSE = 2,
  EL_ERR_IO = 3,
  EL_ERR_EMPTY_ESSAY = 4,
  EL_ERR_UNKNOWN_WORD = 5,
  EL_ERR_OUT_OF_RANGE = 6,
  EL_ERR_DIVERGED = 7,
  EL_ERR_COMPLETENESS = 8,
  EL_ERR_NOT_APPLICABLE = 9,
  EL_ERR_INTERNAL = 10
} el_status;

typedef struct el_corpus el_corpus;
typedef struct el_embeddings el_embeddings;
typedef struct el_scorer el_scorer;
typedef struct el_attributions el_attributions;
typedef struct el_outcomes el_outcomes;

EL_API const char* el_version(void);

/* Message for the most recent failure on this thread ("" if none). */
EL_API const char* el_last_error(void);

/* ------------------------------------------------------------------ corpus */

/* Load a TSV corpus (header: essay_id, prompt_id, score, text) against a
 * rubric file of "prompt_id min max" lines. */
EL_API el_status el_corpus_load(const char* corpus_path, const char* rubric_path,
                                el_corpus** out);
EL_API el_status el_corpus_save(const el_corpus* corpus, const char* corpus_path);
EL_API el_status el_corpus_save_rubrics(const el_corpus* corpus, const char* rubric_path);

/* Seeded random-essay corpus labeled by the keyword-weight ground truth:
 * clamp(round(sum of keyword weights + length_coeff * token count)). */
EL_API el_status el_corpus_synthetic(const el_embeddings* vocabulary, uint64_t seed,
                                     size_t n_essays, const char* const* keywords,
                                     const double* keyword_weights, size_t n_keywords,
                                     double length_coeff, const char* prompt_id, long min_score,
                                     long max_score, size_t min_words, size_t max_words,
                                     int punctuate, el_corpus** out);

EL_API size_t el_corpus_size(const el_corpus* corpus);
EL_API const char* el_corpus_essay_id(const el_corpus* corpus, size_t index);
EL_API const char* el_corpus_prompt_id(const el_corpus* corpus, size_t index);
EL_API el_status el_corpus_human_score(const el_corpus* corpus, size_t index, long* out);
EL_API el_status el_corpus_token_count(const el_corpus* corpus, size_t index, size_t* out);
EL_API const char* el_corpus_token(const el_corpus* corpus, size_t index, size_t token);
EL_API el_status el_corpus_rubric(const el_corpus* corpus, const char* prompt_id, long* min_score,
                                  long* max_score);
EL_API void el_corpus_free(el_corpus* corpus);

/* -------------------------------------------------------------- embeddings */

/* Text layout "word v1 v2 ... vd", one entry per line, consistent dimension.
 * Duplicate words keep the last entry; warnings are readable afterwards. */
EL_API el_status el_embeddings_load(const char* path, el_embeddings** out);
EL_API el_status el_embeddings_save(const el_embeddings* table, const char* path);
EL_API el_status el_embeddings_random(const char* const* words, size_t n_words, size_t dim,
                                      uint64_t seed, double stddev, el_embeddings** out);
EL_API size_t el_embeddings_dim(const el_embeddings* table);
EL_API size_t el_embeddings_size(const el_embeddings* table);
EL_API int el_embeddings_contains(const el_embeddings* table, const char* word);
EL_API size_t el_embeddings_warning_count(const el_embeddings* table);
EL_API const char* el_embeddings_warning(const el_embeddings* table, size_t index);

/* Closest other word by Euclidean distance, ties to the lexicographically
 * smaller word. exclude_self != 0 removes the query from the candidates. */
EL_API el_status el_embeddings_nearest(const el_embeddings* table, const char* word,
                                       int exclude_self, const char** out_word);
EL_API void el_embeddings_free(el_embeddings* table);

/* ------------------------------------------------------------------ scorer */

/* kind: "linear-bow", "mean-pool-mlp" or "recurrent"; hidden is ignored for
 * linear-bow. Parameters start from a seeded gaussian (stddev 0.1). */
EL_API el_status el_scorer_create(const char* kind, size_t dim, size_t hidden, uint64_t seed,
                                  el_scorer** out);
EL_API el_status el_scorer_load(const char* checkpoint_path, el_scorer** out);
EL_API el_status el_scorer_save(const el_scorer* scorer, const char* checkpoint_path);
EL_API const char* el_scorer_kind(const el_scorer* scorer);
EL_API size_t el_scorer_dim(const el_scorer* scorer);

/* Full-batch (batch_size = 0) or seeded mini-batch gradient descent on the
 * MSE against rubric-normalized labels. loss_history, when non-NULL, must
 * hold epochs + 1 doubles; entry e is the MSE before epoch e's update and
 * the final entry is the post-training loss. */
EL_API el_status el_scorer_train(el_scorer* scorer, const el_corpus* corpus,
                                 const el_embeddings* table, size_t epochs, double learning_rate,
                                 size_t batch_size, uint64_t seed, double* loss_history,
                                 double* final_loss);

/* Raw score in [0,1] and the rubric-scaled score for one essay. */
EL_API el_status el_scorer_score(const el_scorer* scorer, const el_corpus* corpus,
                                 const el_embeddings* table, size_t index, double* raw,
                                 double* scaled);
EL_API el_status el_scores_write_csv(const el_scorer* scorer, const el_corpus* corpus,
                                     const el_embeddings* table, const char* csv_path);

/* Writes epoch,mse rows for a recorded loss history. */
EL_API el_status el_loss_write_csv(const double* loss_history, size_t n_entries,
                                   const char* csv_path);
EL_API void el_scorer_free(el_scorer* scorer);

/* ------------------------------------------------------------- attribution */

typedef struct el_ig_options {
  size_t steps;         /* quadrature points, default 50 */
  const char* rule;     /* "left" | "midpoint" | "trapezoid", default midpoint */
  double tolerance;     /* relative completeness tolerance, default 0.05 */
  int threads;          /* worker threads for corpus-level runs, default 1 */
} el_ig_options;

EL_API void el_ig_options_default(el_ig_options* options);

/* Integrated gradients for every essay against the all-zero baseline.
 * Completeness violations are recorded per essay, not fatal. */
EL_API el_status el_attribute(const el_scorer* scorer, const el_corpus* corpus,
                              const el_embeddings* table, const el_ig_options* options,
                              el_attributions** out);
EL_API size_t el_attributions_count(const el_attributions* attrs);
/* Borrowed pointer to the per-token attribution values of one essay. */
EL_API el_status el_attributions_values(const el_attributions* attrs, size_t index,
                                        const double** values, size_t* n_tokens);
EL_API el_status el_attributions_completeness(const el_attributions* attrs, size_t index,
                                              double* error);
EL_API el_status el_attributions_scaled_score(const el_attributions* attrs, size_t index,
                                              double* scaled);
EL_API size_t el_attributions_violations(const el_attributions* attrs);
EL_API el_status el_attributions_write_json(const el_attributions* attrs, const char* json_path);
EL_API el_status el_attributions_write_word_stats_csv(const el_attributions* attrs,
                                                      const char* csv_path);
EL_API el_status el_attributions_write_heatmaps(const el_attributions* attrs,
                                                const char* out_dir);
EL_API void el_attributions_free(el_attributions* attrs);

/* ----------------------------------------------------------- perturbations */

typedef struct el_perturb_options {
  const char* strategy;     /* delete-least | delete-random | add-top | word-soup |
                             * shuffle-sentences | shuffle-words | swap-synonyms |
                             * inject-span */
  const double* fractions;  /* schedule for delete/add; NULL = 0.1 .. 0.9 */
  size_t n_fractions;
  int recompute;            /* re-rank between deletion steps (default 1) */
  double word_soup_fraction;
  double top_fraction;      /* swap-synonyms, default 0.1 */
  double bottom_fraction;   /* swap-synonyms, default 0.1 */
  const char* span_file;    /* inject-span: plain-text file holding the span */
  const char* position;     /* inject-span: "begin", "end" or a token index */
  uint64_t seed;
  el_ig_options ig;
} el_perturb_options;

EL_API void el_perturb_options_default(el_perturb_options* options);

EL_API el_status el_perturb(const el_scorer* scorer, const el_corpus* corpus,
                            const el_embeddings* table, const el_perturb_options* options,
                            el_outcomes** out);
EL_API size_t el_outcomes_count(const el_outcomes* outcomes);
EL_API const char* el_outcomes_strategy(const el_outcomes* outcomes);
EL_API el_status el_outcomes_essay_index(const el_outcomes* outcomes, size_t index, size_t* out);
EL_API el_status el_outcomes_fraction(const el_outcomes* outcomes, size_t index, double* out);
EL_API el_status el_outcomes_original_score(const el_outcomes* outcomes, size_t index,
                                            double* scaled);
EL_API el_status el_outcomes_perturbed_score(const el_outcomes* outcomes, size_t index,
                                             double* scaled);
EL_API size_t el_outcomes_skipped(const el_outcomes* outcomes);
EL_API el_status el_outcomes_write_json(const el_outcomes* outcomes, const char* json_path);
EL_API void el_outcomes_free(el_outcomes* outcomes);

/* ----------------------------------------------------------------- metrics */

/* Quadratic weighted kappa over integer scores within [min_score, max_score]. */
EL_API el_status el_qwk(const long* rater_a, const long* rater_b, size_t n, long min_score,
                        long max_score, double* out);

/* out[0..4] = mu_pos, mu_neg, n_pos, n_neg, sigma (percent of score range). */
EL_API el_status el_impact_stats(const double* original, const double* perturbed, size_t n,
                                 long min_score, long max_score, double out[5]);

/* Per-essay rows and per-prompt/fraction summary rows computed from an
 * outcomes JSON artifact. json_path may be NULL to skip the JSON mirror. */
EL_API el_status el_impact_report(const char* outcomes_json_path, const char* csv_path,
                                  const char* json_path);

/* Relative-QWK curve for mode "deletion", "random-deletion" or "addition". */
EL_API el_status el_curve_csv(const el_scorer* scorer, const el_corpus* corpus,
                              const el_embeddings* table, const char* mode,
                              const double* fractions, size_t n_fractions, uint64_t seed,
                              const el_ig_options* options, const char* csv_path);

/* Smallest top-attributed fraction reproducing each essay's score within
 * tolerance; per-essay CSV plus the corpus mean. */
EL_API el_status el_recovery_csv(const el_scorer* scorer, const el_corpus* corpus,
                                 const el_embeddings* table, double tolerance,
                                 const el_ig_options* options, const char* csv_path,
                                 double* mean_fraction);

/* ------------------------------------------------------------------ report */

/* Heatmap pages plus index.html from an attribution JSON artifact; pass a
 * curve CSV to inline it as an SVG chart, or NULL. */
EL_API el_status el_report_render(const char* attribution_json_path, const char* curve_csv_path,
                                  const char* out_dir);

#ifdef __cplusplus
}
#endif

#endif /* ESSAYLENS_H */
