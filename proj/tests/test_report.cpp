#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>

#include "json.hpp"
#include "report.hpp"
#include "test_util.hpp"

using namespace essaylens;
using test_util::TempDir;
using test_util::make_essay;
using test_util::read_file;

namespace {

std::size_t count_occurrences(const std::string& text, const std::string& needle) {
  std::size_t count = 0;
  for (std::size_t pos = text.find(needle); pos != std::string::npos;
       pos = text.find(needle, pos + needle.size())) {
    ++count;
  }
  return count;
}

// Minimal well-formedness check: every opening tag is closed in order.
bool tags_balanced(const std::string& html) {
  std::vector<std::string> stack;
  std::size_t i = 0;
  while ((i = html.find('<', i)) != std::string::npos) {
    const std::size_t j = html.find('>', i);
    if (j == std::string::npos) return false;
    std::string tag = html.substr(i + 1, j - i - 1);
    i = j + 1;
    if (tag.empty()) return false;
    if (tag[0] == '!') continue;  // doctype
    const bool closing = tag[0] == '/';
    if (closing) tag.erase(0, 1);
    const bool self_closing = tag.back() == '/';
    const std::string name = tag.substr(0, tag.find_first_of(" \t\n/"));
    if (name == "meta") continue;
    if (closing) {
      if (stack.empty() || stack.back() != name) return false;
      stack.pop_back();
    } else if (!self_closing) {
      stack.push_back(name);
    }
  }
  return stack.empty();
}

AttributionVector attr_of(std::vector<double> values) {
  AttributionVector attr;
  attr.per_token = std::move(values);
  attr.raw_delta = 0.0;
  for (double v : attr.per_token) attr.raw_delta += v;
  return attr;
}

}  // namespace

TEST_CASE("heatmap renders one span per token and balanced markup") {
  const auto essay = make_essay({"one", "two", "three", "."});
  const auto attr = attr_of({0.5, -0.2, 0.0, 0.1});
  const ScaledScore score = scale_score(0.6, {"P1", 0, 10});
  const std::string html = render_heatmap_html(essay, attr, score);
  CHECK(count_occurrences(html, "<span class=\"tok\"") == 4);
  CHECK(tags_balanced(html));
  CHECK(html.find("essay t1") != std::string::npos);
}

TEST_CASE("heatmap with all-zero attributions highlights nothing") {
  const auto essay = make_essay({"a", "b", "c"});
  const auto attr = attr_of({0.0, 0.0, 0.0});
  const std::string html = render_heatmap_html(essay, attr, scale_score(0.5, {"P1", 0, 10}));
  CHECK(count_occurrences(html, "background-color") == 0);
  CHECK(count_occurrences(html, "<span class=\"tok\"") == 3);
}

TEST_CASE("the attribution maximum renders fully saturated") {
  const auto essay = make_essay({"small", "peak", "negative"});
  const auto attr = attr_of({0.1, 0.4, -0.2});
  const std::string html = render_heatmap_html(essay, attr, scale_score(0.5, {"P1", 0, 10}));
  CHECK(html.find("rgba(26,137,23,1.000)") != std::string::npos);   // the positive peak
  CHECK(html.find("rgba(196,30,58,0.500)") != std::string::npos);   // -0.2 / 0.4
  CHECK(html.find("rgba(26,137,23,0.250)") != std::string::npos);   // 0.1 / 0.4
}

TEST_CASE("heatmap escapes html-sensitive tokens") {
  const auto essay = make_essay({"<script>", "a&b", "\"quote"});
  const auto attr = attr_of({0.1, 0.2, 0.3});
  const std::string html = render_heatmap_html(essay, attr, scale_score(0.5, {"P1", 0, 10}));
  CHECK(html.find("<script>") == std::string::npos);
  CHECK(html.find("&lt;script&gt;") != std::string::npos);
  CHECK(html.find("a&amp;b") != std::string::npos);
  CHECK(tags_balanced(html));
}

TEST_CASE("heatmap rejects mismatched lengths") {
  const auto essay = make_essay({"a", "b"});
  const auto attr = attr_of({0.1});
  CHECK_THROWS_AS(render_heatmap_html(essay, attr, scale_score(0.5, {"P1", 0, 10})),
                  InvalidInputError);
}

namespace {

struct ArtifactFixture {
  EmbeddingTable table{2};
  LabeledCorpus corpus;
  LinearBowScorer scorer{std::vector<double>{1.0, 0.0}, 0.5};

  ArtifactFixture() {
    table.insert("up", {0.05, 0.0});
    table.insert("down", {-0.04, 0.0});
    table.insert("flat", {0.0, 1.0});
    corpus.rubrics["P1"] = {"P1", 0, 10};
    const std::vector<std::vector<std::string>> texts = {
        {"up", "flat", "down", "."}, {"up", "up", "flat", "."}, {"down", "flat", "up", "."}};
    const std::vector<long> labels = {5, 6, 5};  // the rounded linear scores
    for (std::size_t id = 0; id < texts.size(); ++id) {
      LabeledEssay entry;
      entry.essay = make_essay(texts[id], "a" + std::to_string(id), "P1");
      entry.human_score = labels[id];
      corpus.essays.push_back(entry);
    }
  }
};

}  // namespace

TEST_CASE("attribution json artifact carries the per-essay record") {
  TempDir dir("attr_json");
  ArtifactFixture fx;
  const CorpusAttribution result = attribute_corpus(fx.scorer, fx.corpus, fx.table, IgConfig{});
  write_attribution_json(dir.file("attr.json"), fx.corpus, result);

  const auto doc = nlohmann::json::parse(read_file(dir.file("attr.json")));
  CHECK(doc.at("schema") == "essaylens.attributions.v1");
  REQUIRE(doc.at("essays").size() == 3);
  const auto& first = doc.at("essays")[0];
  CHECK(first.at("essay_id") == "a0");
  CHECK(first.at("tokens").size() == 4);
  CHECK(first.at("per_token").size() == 4);
  // Completeness passthrough: the stored values sum to the stored delta.
  double total = 0.0;
  for (const auto& v : first.at("per_token")) total += v.get<double>();
  CHECK(total == doctest::Approx(first.at("raw_delta").get<double>()).epsilon(1e-9));
  CHECK(doc.at("top_positive_words")[0].at("word") == "up");
  CHECK(doc.at("top_negative_words")[0].at("word") == "down");
}

TEST_CASE("csv artifacts carry versioned schema lines") {
  TempDir dir("csv");
  ArtifactFixture fx;

  std::vector<ScaledScore> scores;
  for (const auto& entry : fx.corpus.essays) {
    scores.push_back(score_essay(fx.scorer, embed(entry.essay, fx.table), {"P1", 0, 10}));
  }
  write_scores_csv(dir.file("scores.csv"), fx.corpus, scores);
  const std::string scores_csv = read_file(dir.file("scores.csv"));
  CHECK(scores_csv.rfind("# schema: essaylens.scores.v1\n", 0) == 0);
  CHECK(count_occurrences(scores_csv, "\n") == 2 + fx.corpus.size());

  const CorpusAttribution result = attribute_corpus(fx.scorer, fx.corpus, fx.table, IgConfig{});
  write_word_stats_csv(dir.file("words.csv"), result.word_stats);
  const std::string words_csv = read_file(dir.file("words.csv"));
  CHECK(words_csv.rfind("# schema: essaylens.word_stats.v1\n", 0) == 0);
  CHECK(words_csv.find("word,count,mean_attribution,mean_abs_attribution\n") !=
        std::string::npos);

  write_loss_csv(dir.file("loss.csv"), {0.5, 0.25, 0.1});
  CHECK(read_file(dir.file("loss.csv")).rfind("# schema: essaylens.loss.v1\n", 0) == 0);

  write_recovery_csv(dir.file("rec.csv"), fx.corpus, {0.25, 0.5, 1.0}, 1.0);
  const std::string rec = read_file(dir.file("rec.csv"));
  CHECK(rec.rfind("# schema: essaylens.recovery.v1\n", 0) == 0);
  CHECK(rec.find("summary,,,0.583333,1") != std::string::npos);
}

TEST_CASE("outcome json and the impact report work end to end") {
  TempDir dir("impact");
  ArtifactFixture fx;

  BatterySpec spec;
  spec.strategy = "delete-least";
  spec.schedule = Schedule{{0.25, 0.5}, true};
  const BatteryRun run = run_battery(fx.scorer, fx.table, fx.corpus, spec);
  write_outcomes_json(dir.file("outcomes.json"), fx.corpus, run);

  const auto doc = nlohmann::json::parse(read_file(dir.file("outcomes.json")));
  CHECK(doc.at("schema") == "essaylens.outcomes.v1");
  CHECK(doc.at("strategy") == "delete-least");
  REQUIRE(doc.at("outcomes").size() == run.outcomes.size());
  CHECK(doc.at("outcomes")[0].at("original").at("tokens").size() == 4);

  write_impact_report(dir.file("impact.csv"), dir.file("impact.json"), dir.file("outcomes.json"));
  const std::string csv = read_file(dir.file("impact.csv"));
  CHECK(csv.rfind("# schema: essaylens.impact.v1\n", 0) == 0);
  CHECK(count_occurrences(csv, "\nessay,") + count_occurrences(csv, "\nsummary,") ==
        run.outcomes.size() + 2);  // one summary row per fraction

  const auto impact = nlohmann::json::parse(read_file(dir.file("impact.json")));
  REQUIRE(impact.at("summary").size() == 2);

  // Cross-check one summary row against impact_stats directly.
  std::vector<double> original, perturbed;
  for (std::size_t o = 0; o < run.outcomes.size(); ++o) {
    if (run.outcomes[o].strategy.fraction == 0.25) {
      original.push_back(run.outcomes[o].original.score.scaled);
      perturbed.push_back(run.outcomes[o].perturbed.score.scaled);
    }
  }
  const ImpactStats expected = impact_stats(original, perturbed, {"P1", 0, 10});
  const auto& row = impact.at("summary")[0];
  CHECK(row.at("fraction").get<double>() == 0.25);
  CHECK(row.at("mu_neg").get<double>() == doctest::Approx(expected.mu_neg).epsilon(1e-9));
  CHECK(row.at("sigma").get<double>() == doctest::Approx(expected.sigma).epsilon(1e-9));
  CHECK(row.at("n_samples").get<std::size_t>() == expected.n_samples);
}

TEST_CASE("report rendering produces an index and one page per essay") {
  TempDir dir("report");
  ArtifactFixture fx;
  const CorpusAttribution result = attribute_corpus(fx.scorer, fx.corpus, fx.table, IgConfig{});
  write_attribution_json(dir.file("attr.json"), fx.corpus, result);

  const auto points = relative_qwk_curve(fx.scorer, fx.table, fx.corpus, {"P1", 0, 10},
                                         CurveMode::DeleteLeast, Schedule{{0.25, 0.5}, true}, 0,
                                         IgConfig{});
  write_curve_csv(dir.file("curve.csv"), "P1", "deletion", points);

  render_report_dir(dir.file("out"), dir.file("attr.json"), dir.file("curve.csv"));
  CHECK(std::filesystem::exists(dir.file("out/index.html")));
  CHECK(std::filesystem::exists(dir.file("out/essay_a0.html")));
  CHECK(std::filesystem::exists(dir.file("out/essay_a1.html")));
  CHECK(std::filesystem::exists(dir.file("out/essay_a2.html")));

  const std::string index = read_file(dir.file("out/index.html"));
  CHECK(tags_balanced(index));
  CHECK(index.find("essay_a0.html") != std::string::npos);
  CHECK(index.find("<svg") != std::string::npos);  // inlined curve
  CHECK(tags_balanced(read_file(dir.file("out/essay_a0.html"))));

  CHECK_THROWS_AS(render_report_dir(dir.file("out2"), dir.file("missing.json")), IoError);
}
