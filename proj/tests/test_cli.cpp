// Drives the installed CLI binary end to end against the bundled fixtures.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <sys/wait.h>

#include "json.hpp"
#include "metrics.hpp"
#include "scorer.hpp"
#include "test_util.hpp"

using namespace essaylens;
using test_util::TempDir;
using test_util::read_file;

namespace {

int run_cli(const std::string& args, const std::string& log_path = "/dev/null") {
  const std::string command =
      std::string(ESSAYLENS_CLI_PATH) + " " + args + " > " + log_path + " 2>&1";
  const int status = std::system(command.c_str());
  REQUIRE(status != -1);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

const std::string kFixtures = FIXTURES_DIR;

std::string shared_inputs() {
  return " --corpus " + kFixtures + "/corpus.tsv --rubrics " + kFixtures +
         "/rubrics.txt --embeddings " + kFixtures + "/embeddings.txt";
}

}  // namespace

TEST_CASE("help exits zero, usage errors exit two") {
  CHECK(run_cli("--help") == 0);
  CHECK(run_cli("train --help") == 0);
  CHECK(run_cli("definitely-not-a-subcommand") == 2);
  CHECK(run_cli("train --no-such-flag") == 2);
  // Required flags missing.
  CHECK(run_cli("train --corpus a.tsv") == 2);
  // Referenced file does not exist.
  TempDir dir("cli_usage");
  CHECK(run_cli("train --corpus missing.tsv --rubrics missing.txt --embeddings missing.txt "
                "--seed 1 --out " +
                dir.file("x.ckpt")) == 2);
  // Malformed input file.
  test_util::write_file(dir.file("bad.tsv"), "essay_id\tprompt_id\tscore\ttext\n1\tP1\t99\thi\n");
  test_util::write_file(dir.file("r.txt"), "P1 0 10\n");
  test_util::write_file(dir.file("e.txt"), "hi 1 2\n");
  CHECK(run_cli("train --corpus " + dir.file("bad.tsv") + " --rubrics " + dir.file("r.txt") +
                " --embeddings " + dir.file("e.txt") + " --seed 1 --out " +
                dir.file("x.ckpt")) == 2);
  // Randomized strategies insist on a seed.
  CHECK(run_cli("perturb" + shared_inputs() + " --checkpoint nope.ckpt "
                "--strategy shuffle-words --out " + dir.file("o.json")) == 2);
}

TEST_CASE("the fixture pipeline runs end to end") {
  TempDir dir("cli_pipeline");
  const std::string ckpt = dir.file("scorer.ckpt");
  const std::string log = dir.file("log.txt");

  REQUIRE(run_cli("train" + shared_inputs() +
                      " --scorer-kind mean-pool-mlp --hidden 8 --epochs 150 --lr 0.5 --seed 3"
                      " --out " + ckpt + " --loss-out " + dir.file("loss.csv"),
                  log) == 0);
  CHECK(std::filesystem::exists(ckpt));
  CHECK(read_file(dir.file("loss.csv")).rfind("# schema: essaylens.loss.v1\n", 0) == 0);

  SUBCASE("score") {
    REQUIRE(run_cli("score" + shared_inputs() + " --checkpoint " + ckpt + " --out " +
                        dir.file("scores.csv"),
                    log) == 0);
    const std::string csv = read_file(dir.file("scores.csv"));
    CHECK(csv.rfind("# schema: essaylens.scores.v1\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 2 + 10);  // schema + header + essays
  }

  SUBCASE("attribute emits completeness-consistent JSON") {
    REQUIRE(run_cli("attribute" + shared_inputs() + " --checkpoint " + ckpt + " --out " +
                        dir.file("attr.json") + " --word-stats " + dir.file("words.csv"),
                    log) == 0);
    const auto doc = nlohmann::json::parse(read_file(dir.file("attr.json")));
    REQUIRE(doc.at("essays").size() == 10);
    for (const auto& rec : doc.at("essays")) {
      double total = 0.0;
      for (const auto& v : rec.at("per_token")) total += v.get<double>();
      const double delta = rec.at("raw_delta").get<double>();
      const double error = rec.at("completeness_error").get<double>();
      CHECK(std::fabs(total - delta) <=
            0.05 * std::max(std::fabs(delta), 1e-12) + 1e-12);
      CHECK(error <= 0.05);
    }
    CHECK(read_file(dir.file("words.csv")).rfind("# schema: essaylens.word_stats.v1\n", 0) == 0);

    REQUIRE(run_cli("report --attributions " + dir.file("attr.json") + " --out-dir " +
                        dir.file("report"),
                    log) == 0);
    CHECK(std::filesystem::exists(dir.file("report/index.html")));
    CHECK(std::filesystem::exists(dir.file("report/essay_e01.html")));
  }

  SUBCASE("seeded perturbation outcomes are byte-identical across runs") {
    REQUIRE(run_cli("perturb" + shared_inputs() + " --checkpoint " + ckpt +
                        " --strategy shuffle-sentences --seed 7 --out " + dir.file("o1.json"),
                    log) == 0);
    REQUIRE(run_cli("perturb" + shared_inputs() + " --checkpoint " + ckpt +
                        " --strategy shuffle-sentences --seed 7 --out " + dir.file("o2.json"),
                    log) == 0);
    CHECK(read_file(dir.file("o1.json")) == read_file(dir.file("o2.json")));

    REQUIRE(run_cli("metrics --outcomes " + dir.file("o1.json") + " --out " +
                        dir.file("impact.csv"),
                    log) == 0);
    CHECK(read_file(dir.file("impact.csv")).rfind("# schema: essaylens.impact.v1\n", 0) == 0);
  }

  SUBCASE("span injection with a bundled fixture span") {
    REQUIRE(run_cli("perturb" + shared_inputs() + " --checkpoint " + ckpt +
                        " --strategy inject-span --span-file " + kFixtures +
                        "/spans/world_is_flat.txt --position begin --out " +
                        dir.file("inject.json"),
                    log) == 0);
    const auto doc = nlohmann::json::parse(read_file(dir.file("inject.json")));
    REQUIRE(doc.at("outcomes").size() == 10);
    const auto& first = doc.at("outcomes")[0];
    CHECK(first.at("injected").size() == 5);  // "the world is flat ."
    CHECK(first.at("perturbed").at("tokens")[0] == "the");
  }

  SUBCASE("the curve subcommand agrees with a direct recomputation") {
    REQUIRE(run_cli("metrics --curve deletion" + shared_inputs() + " --checkpoint " + ckpt +
                        " --fractions 0.2 0.4 --out " + dir.file("curve.csv"),
                    log) == 0);
    const std::string csv = read_file(dir.file("curve.csv"));
    CHECK(csv.rfind("# schema: essaylens.curve.v1\n", 0) == 0);
    REQUIRE(std::count(csv.begin(), csv.end(), '\n') == 4);  // schema + header + 2 fractions

    // Recompute through the library and compare the printed values.
    const LabeledCorpus corpus =
        load_corpus(kFixtures + "/corpus.tsv", kFixtures + "/rubrics.txt");
    const EmbeddingTable table = load_embeddings(kFixtures + "/embeddings.txt").table;
    const auto scorer = load_checkpoint(ckpt);
    const auto points =
        relative_qwk_curve(*scorer, table, corpus, corpus.rubric_for("P1"),
                           CurveMode::DeleteLeast, Schedule{{0.2, 0.4}, true}, 0, IgConfig{});

    std::istringstream lines(csv);
    std::string line;
    std::getline(lines, line);  // schema
    std::getline(lines, line);  // header
    for (const auto& point : points) {
      REQUIRE(std::getline(lines, line));
      std::vector<std::string> fields;
      std::string cur;
      for (char c : line) {
        if (c == ',') {
          fields.push_back(cur);
          cur.clear();
        } else {
          cur.push_back(c);
        }
      }
      fields.push_back(cur);
      REQUIRE(fields.size() == 7);
      CHECK(std::strtod(fields[2].c_str(), nullptr) == doctest::Approx(point.fraction));
      CHECK(std::strtod(fields[3].c_str(), nullptr) == doctest::Approx(point.qwk).epsilon(1e-5));
      CHECK(std::strtod(fields[5].c_str(), nullptr) ==
            doctest::Approx(point.relative_qwk).epsilon(1e-5));
    }
  }

  SUBCASE("recovery sweep") {
    REQUIRE(run_cli("metrics --recovery-tolerance 1.0" + shared_inputs() + " --checkpoint " +
                        ckpt + " --out " + dir.file("recovery.csv"),
                    log) == 0);
    const std::string csv = read_file(dir.file("recovery.csv"));
    CHECK(csv.rfind("# schema: essaylens.recovery.v1\n", 0) == 0);
    CHECK(csv.find("summary,") != std::string::npos);
  }
}

TEST_CASE("metrics demands exactly one mode") {
  TempDir dir("cli_modes");
  CHECK(run_cli("metrics --out " + dir.file("x.csv")) == 2);
  CHECK(run_cli("metrics --outcomes a.json --curve deletion --out " + dir.file("x.csv")) == 2);
}
