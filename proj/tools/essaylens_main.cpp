// essaylens command-line driver. Talks to the shared library exclusively
// through the C API in essaylens.h.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "essaylens.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

struct Failure {
  int exit_code;
  std::string message;
};

void check(el_status status, const char* what) {
  if (status == EL_OK) return;
  // Bad inputs and unreadable/ill-formed files are usage errors; everything
  // else is a runtime failure.
  const bool usage = status == EL_ERR_INVALID_ARGUMENT || status == EL_ERR_PARSE ||
                     status == EL_ERR_IO || status == EL_ERR_UNKNOWN_WORD;
  throw Failure{usage ? kExitUsage : kExitRuntime,
                std::string(what) + ": " + el_last_error()};
}

void require_file(const std::string& path, const char* what) {
  if (!std::filesystem::exists(path)) {
    throw Failure{kExitUsage, std::string(what) + ": file not found: " + path};
  }
}

struct CorpusDeleter { void operator()(el_corpus* c) const { el_corpus_free(c); } };
struct EmbeddingsDeleter { void operator()(el_embeddings* e) const { el_embeddings_free(e); } };
struct ScorerDeleter { void operator()(el_scorer* s) const { el_scorer_free(s); } };
struct AttrDeleter { void operator()(el_attributions* a) const { el_attributions_free(a); } };
struct OutcomesDeleter { void operator()(el_outcomes* o) const { el_outcomes_free(o); } };

using CorpusPtr = std::unique_ptr<el_corpus, CorpusDeleter>;
using EmbeddingsPtr = std::unique_ptr<el_embeddings, EmbeddingsDeleter>;
using ScorerPtr = std::unique_ptr<el_scorer, ScorerDeleter>;
using AttrPtr = std::unique_ptr<el_attributions, AttrDeleter>;
using OutcomesPtr = std::unique_ptr<el_outcomes, OutcomesDeleter>;

CorpusPtr load_corpus_checked(const std::string& corpus_path, const std::string& rubric_path) {
  require_file(corpus_path, "corpus");
  require_file(rubric_path, "rubrics");
  el_corpus* corpus = nullptr;
  check(el_corpus_load(corpus_path.c_str(), rubric_path.c_str(), &corpus), "loading corpus");
  return CorpusPtr(corpus);
}

EmbeddingsPtr load_embeddings_checked(const std::string& path) {
  require_file(path, "embeddings");
  el_embeddings* table = nullptr;
  check(el_embeddings_load(path.c_str(), &table), "loading embeddings");
  for (size_t i = 0; i < el_embeddings_warning_count(table); ++i) {
    std::fprintf(stderr, "warning: %s\n", el_embeddings_warning(table, i));
  }
  return EmbeddingsPtr(table);
}

ScorerPtr load_scorer_checked(const std::string& path) {
  require_file(path, "checkpoint");
  el_scorer* scorer = nullptr;
  check(el_scorer_load(path.c_str(), &scorer), "loading checkpoint");
  return ScorerPtr(scorer);
}

void make_parent_dirs(const std::string& path) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Word-level score attribution and perturbation testing for "
               "differentiable essay scorers"};
  app.require_subcommand(1);

  // Shared option storage.
  std::string corpus_path, rubric_path, embeddings_path, checkpoint_path;
  std::string out_path, out_dir, json_out, csv_out;
  std::uint64_t seed = 0;
  el_ig_options ig;
  el_ig_options_default(&ig);
  std::size_t ig_steps = 50;
  std::string ig_rule = "midpoint";
  double ig_tolerance = 0.05;
  int threads = 1;

  auto add_ig_options = [&](CLI::App* cmd) {
    cmd->add_option("--steps", ig_steps, "Integration steps (default 50)");
    cmd->add_option("--rule", ig_rule, "Quadrature rule: left, midpoint, trapezoid")
        ->check(CLI::IsMember({"left", "midpoint", "trapezoid"}));
    cmd->add_option("--tolerance", ig_tolerance, "Relative completeness tolerance (default 0.05)");
    cmd->add_option("--threads", threads, "Worker threads (default 1)");
  };
  auto ig_opts = [&]() {
    ig.steps = ig_steps;
    ig.rule = ig_rule.c_str();
    ig.tolerance = ig_tolerance;
    ig.threads = threads;
    return &ig;
  };

  // ---- train ----
  auto* train = app.add_subcommand("train", "Fit a scorer to a labeled corpus");
  std::string scorer_kind = "mean-pool-mlp";
  std::size_t hidden = 16;
  std::size_t epochs = 500;
  double learning_rate = 0.5;
  std::size_t batch_size = 0;
  std::string loss_csv;
  train->add_option("--corpus", corpus_path, "Corpus TSV")->required();
  train->add_option("--rubrics", rubric_path, "Rubric file")->required();
  train->add_option("--embeddings", embeddings_path, "Embedding text file")->required();
  train->add_option("--scorer-kind", scorer_kind, "linear-bow, mean-pool-mlp or recurrent")
      ->check(CLI::IsMember({"linear-bow", "mean-pool-mlp", "recurrent"}));
  train->add_option("--hidden", hidden, "Hidden units (default 16)");
  train->add_option("--epochs", epochs, "Training epochs (default 500)");
  train->add_option("--lr", learning_rate, "Learning rate (default 0.5)");
  train->add_option("--batch-size", batch_size, "Mini-batch size, 0 = full batch");
  train->add_option("--seed", seed, "Seed for init and batch order")->required();
  train->add_option("--out", out_path, "Checkpoint output path")->required();
  train->add_option("--loss-out", loss_csv, "Optional per-epoch loss CSV");

  // ---- score ----
  auto* score = app.add_subcommand("score", "Score a corpus with a trained scorer");
  score->add_option("--corpus", corpus_path, "Corpus TSV")->required();
  score->add_option("--rubrics", rubric_path, "Rubric file")->required();
  score->add_option("--embeddings", embeddings_path, "Embedding text file")->required();
  score->add_option("--checkpoint", checkpoint_path, "Scorer checkpoint")->required();
  score->add_option("--out", out_path, "Scores CSV output")->required();

  // ---- attribute ----
  auto* attribute = app.add_subcommand("attribute", "Integrated-gradients word attribution");
  std::string word_stats_csv;
  attribute->add_option("--corpus", corpus_path, "Corpus TSV")->required();
  attribute->add_option("--rubrics", rubric_path, "Rubric file")->required();
  attribute->add_option("--embeddings", embeddings_path, "Embedding text file")->required();
  attribute->add_option("--checkpoint", checkpoint_path, "Scorer checkpoint")->required();
  attribute->add_option("--out", out_path, "Attribution JSON output")->required();
  attribute->add_option("--word-stats", word_stats_csv, "Optional per-word stats CSV");
  add_ig_options(attribute);

  // ---- perturb ----
  auto* perturb = app.add_subcommand("perturb", "Run a perturbation strategy over a corpus");
  std::string strategy;
  std::vector<double> fractions;
  bool no_recompute = false;
  double word_soup_fraction = 0.4;
  double top_fraction = 0.1, bottom_fraction = 0.1;
  std::string span_file, position = "begin";
  bool seed_set = false;
  perturb->add_option("--corpus", corpus_path, "Corpus TSV")->required();
  perturb->add_option("--rubrics", rubric_path, "Rubric file")->required();
  perturb->add_option("--embeddings", embeddings_path, "Embedding text file")->required();
  perturb->add_option("--checkpoint", checkpoint_path, "Scorer checkpoint")->required();
  perturb->add_option("--strategy", strategy,
                      "delete-least, delete-random, add-top, word-soup, shuffle-sentences, "
                      "shuffle-words, swap-synonyms, inject-span")
      ->required()
      ->check(CLI::IsMember({"delete-least", "delete-random", "add-top", "word-soup",
                             "shuffle-sentences", "shuffle-words", "swap-synonyms",
                             "inject-span"}));
  perturb->add_option("--fractions", fractions,
                      "Schedule fractions in (0,1] for delete/add (default 0.1..0.9)");
  perturb->add_flag("--no-recompute", no_recompute,
                    "Rank once instead of re-ranking between deletion steps");
  perturb->add_option("--word-soup-fraction", word_soup_fraction,
                      "Fraction kept by word-soup (default 0.4)");
  perturb->add_option("--top-fraction", top_fraction, "swap-synonyms top percentile");
  perturb->add_option("--bottom-fraction", bottom_fraction, "swap-synonyms bottom percentile");
  perturb->add_option("--span-file", span_file, "inject-span: text file with the span");
  perturb->add_option("--position", position, "inject-span: begin, end or token index");
  auto* seed_opt = perturb->add_option("--seed", seed, "Seed for randomized strategies");
  perturb->add_option("--out", out_path, "Outcome JSON output")->required();
  add_ig_options(perturb);

  // ---- metrics ----
  auto* metrics = app.add_subcommand("metrics", "Impact statistics, curves and recovery");
  std::string outcomes_json, curve_mode;
  std::vector<double> curve_fractions;
  double recovery_tolerance = -1.0;
  metrics->add_option("--outcomes", outcomes_json, "Outcome JSON to summarize");
  metrics->add_option("--curve", curve_mode,
                      "Relative-QWK curve mode: deletion, random-deletion, addition");
  metrics->add_option("--recovery-tolerance", recovery_tolerance,
                      "Run the recovery sweep with this scaled-score tolerance");
  metrics->add_option("--corpus", corpus_path, "Corpus TSV (curve/recovery)");
  metrics->add_option("--rubrics", rubric_path, "Rubric file (curve/recovery)");
  metrics->add_option("--embeddings", embeddings_path, "Embedding file (curve/recovery)");
  metrics->add_option("--checkpoint", checkpoint_path, "Scorer checkpoint (curve/recovery)");
  metrics->add_option("--fractions", curve_fractions, "Curve fractions (default 0.1..0.9)");
  metrics->add_option("--seed", seed, "Seed for random-deletion");
  metrics->add_option("--out", csv_out, "CSV output")->required();
  metrics->add_option("--json-out", json_out, "Optional JSON mirror (impact mode)");
  add_ig_options(metrics);

  // ---- report ----
  auto* report = app.add_subcommand("report", "Render HTML heatmaps from an attribution JSON");
  std::string attributions_json, curve_csv;
  report->add_option("--attributions", attributions_json, "Attribution JSON artifact")
      ->required();
  report->add_option("--curve", curve_csv, "Optional curve CSV to inline as SVG");
  report->add_option("--out-dir", out_dir, "Report output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (*train) {
      auto corpus = load_corpus_checked(corpus_path, rubric_path);
      auto table = load_embeddings_checked(embeddings_path);
      el_scorer* raw_scorer = nullptr;
      check(el_scorer_create(scorer_kind.c_str(), el_embeddings_dim(table.get()), hidden, seed,
                             &raw_scorer),
            "creating scorer");
      ScorerPtr scorer(raw_scorer);
      std::vector<double> losses(epochs + 1, 0.0);
      double final_loss = 0.0;
      check(el_scorer_train(scorer.get(), corpus.get(), table.get(), epochs, learning_rate,
                            batch_size, seed, losses.data(), &final_loss),
            "training");
      make_parent_dirs(out_path);
      check(el_scorer_save(scorer.get(), out_path.c_str()), "saving checkpoint");
      if (!loss_csv.empty()) {
        make_parent_dirs(loss_csv);
        check(el_loss_write_csv(losses.data(), losses.size(), loss_csv.c_str()),
              "writing loss history");
      }
      std::printf("trained %s on %zu essays, final mse %.8f -> %s\n", scorer_kind.c_str(),
                  el_corpus_size(corpus.get()), final_loss, out_path.c_str());
    } else if (*score) {
      auto corpus = load_corpus_checked(corpus_path, rubric_path);
      auto table = load_embeddings_checked(embeddings_path);
      auto scorer = load_scorer_checked(checkpoint_path);
      make_parent_dirs(out_path);
      check(el_scores_write_csv(scorer.get(), corpus.get(), table.get(), out_path.c_str()),
            "writing scores");
      std::printf("scored %zu essays -> %s\n", el_corpus_size(corpus.get()), out_path.c_str());
    } else if (*attribute) {
      auto corpus = load_corpus_checked(corpus_path, rubric_path);
      auto table = load_embeddings_checked(embeddings_path);
      auto scorer = load_scorer_checked(checkpoint_path);
      el_attributions* raw_attrs = nullptr;
      check(el_attribute(scorer.get(), corpus.get(), table.get(), ig_opts(), &raw_attrs),
            "attributing");
      AttrPtr attrs(raw_attrs);
      make_parent_dirs(out_path);
      check(el_attributions_write_json(attrs.get(), out_path.c_str()),
            "writing attribution JSON");
      if (!word_stats_csv.empty()) {
        make_parent_dirs(word_stats_csv);
        check(el_attributions_write_word_stats_csv(attrs.get(), word_stats_csv.c_str()),
              "writing word stats");
      }
      std::printf("attributed %zu essays (%zu completeness violations) -> %s\n",
                  el_attributions_count(attrs.get()), el_attributions_violations(attrs.get()),
                  out_path.c_str());
    } else if (*perturb) {
      const bool randomized = strategy == "delete-random" || strategy == "shuffle-sentences" ||
                              strategy == "shuffle-words";
      seed_set = seed_opt->count() > 0;
      if (randomized && !seed_set) {
        throw Failure{kExitUsage, "strategy " + strategy + " requires --seed"};
      }
      auto corpus = load_corpus_checked(corpus_path, rubric_path);
      auto table = load_embeddings_checked(embeddings_path);
      auto scorer = load_scorer_checked(checkpoint_path);
      el_perturb_options options;
      el_perturb_options_default(&options);
      options.strategy = strategy.c_str();
      if (!fractions.empty()) {
        options.fractions = fractions.data();
        options.n_fractions = fractions.size();
      }
      options.recompute = no_recompute ? 0 : 1;
      options.word_soup_fraction = word_soup_fraction;
      options.top_fraction = top_fraction;
      options.bottom_fraction = bottom_fraction;
      if (!span_file.empty()) {
        require_file(span_file, "span file");
        options.span_file = span_file.c_str();
      } else if (strategy == "inject-span") {
        throw Failure{kExitUsage, "inject-span requires --span-file"};
      }
      options.position = position.c_str();
      options.seed = seed;
      options.ig = *ig_opts();
      el_outcomes* raw_outcomes = nullptr;
      check(el_perturb(scorer.get(), corpus.get(), table.get(), &options, &raw_outcomes),
            "perturbing");
      OutcomesPtr outcomes(raw_outcomes);
      make_parent_dirs(out_path);
      check(el_outcomes_write_json(outcomes.get(), out_path.c_str()), "writing outcomes");
      std::printf("%s: %zu outcomes, %zu skipped -> %s\n", strategy.c_str(),
                  el_outcomes_count(outcomes.get()), el_outcomes_skipped(outcomes.get()),
                  out_path.c_str());
    } else if (*metrics) {
      const int modes = (!outcomes_json.empty() ? 1 : 0) + (!curve_mode.empty() ? 1 : 0) +
                        (recovery_tolerance >= 0.0 ? 1 : 0);
      if (modes != 1) {
        throw Failure{kExitUsage,
                      "metrics needs exactly one of --outcomes, --curve, --recovery-tolerance"};
      }
      make_parent_dirs(csv_out);
      if (!outcomes_json.empty()) {
        require_file(outcomes_json, "outcomes");
        check(el_impact_report(outcomes_json.c_str(),
                               csv_out.c_str(), json_out.empty() ? nullptr : json_out.c_str()),
              "computing impact stats");
        std::printf("impact stats -> %s\n", csv_out.c_str());
      } else {
        auto corpus = load_corpus_checked(corpus_path, rubric_path);
        auto table = load_embeddings_checked(embeddings_path);
        auto scorer = load_scorer_checked(checkpoint_path);
        if (!curve_mode.empty()) {
          check(el_curve_csv(scorer.get(), corpus.get(), table.get(), curve_mode.c_str(),
                             curve_fractions.empty() ? nullptr : curve_fractions.data(),
                             curve_fractions.size(), seed, ig_opts(), csv_out.c_str()),
                "computing curve");
          std::printf("%s curve -> %s\n", curve_mode.c_str(), csv_out.c_str());
        } else {
          double mean_fraction = 0.0;
          check(el_recovery_csv(scorer.get(), corpus.get(), table.get(), recovery_tolerance,
                                ig_opts(), csv_out.c_str(), &mean_fraction),
                "computing recovery");
          std::printf("mean recovery fraction %.4f -> %s\n", mean_fraction, csv_out.c_str());
        }
      }
    } else if (*report) {
      require_file(attributions_json, "attributions");
      if (!curve_csv.empty()) require_file(curve_csv, "curve");
      check(el_report_render(attributions_json.c_str(),
                             curve_csv.empty() ? nullptr : curve_csv.c_str(), out_dir.c_str()),
            "rendering report");
      std::printf("report -> %s/index.html\n", out_dir.c_str());
    }
  } catch (const Failure& f) {
    std::fprintf(stderr, "error: %s\n", f.message.c_str());
    return f.exit_code;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitRuntime;
  }
  return kExitOk;
}
