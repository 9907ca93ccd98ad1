#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "embedding.hpp"
#include "test_util.hpp"

using namespace essaylens;
using test_util::TempDir;
using test_util::make_essay;
using test_util::write_file;

namespace {

EmbeddingTable three_word_table() {
  EmbeddingTable table(2);
  table.insert("a", {0.0, 0.0});
  table.insert("b", {1.0, 0.0});
  table.insert("c", {5.0, 5.0});
  return table;
}

double distance(const std::vector<double>& u, const std::vector<double>& v) {
  double d2 = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) d2 += (u[i] - v[i]) * (u[i] - v[i]);
  return std::sqrt(d2);
}

}  // namespace

TEST_CASE("embed produces one row per token and zero rows for OOV tokens") {
  EmbeddingTable table = random_embeddings(3, {"alpha", "beta", "gamma"}, 8);
  const auto essay = make_essay({"alpha", "missing", "beta", "gamma", "alpha"});
  const EmbeddedEssay embedded = embed(essay, table);
  CHECK(embedded.matrix.rows() == 5);
  CHECK(embedded.matrix.cols() == 8);
  for (std::size_t d = 0; d < 8; ++d) {
    CHECK(embedded.matrix(0, d) == (*table.find("alpha"))[d]);
    CHECK(embedded.matrix(1, d) == 0.0);
    CHECK(embedded.matrix(4, d) == embedded.matrix(0, d));
  }

  const auto all_oov = make_essay({"xx", "yy"});
  const EmbeddedEssay zeros = embed(all_oov, table);
  for (double v : zeros.matrix.data()) CHECK(v == 0.0);
}

TEST_CASE("embed is linear in the table") {
  EmbeddingTable table = random_embeddings(11, {"u", "v", "w"}, 4);
  EmbeddingTable scaled(4);
  const double c = -2.5;
  for (const auto& [word, vec] : table.entries()) {
    std::vector<double> sv(vec.size());
    for (std::size_t i = 0; i < vec.size(); ++i) sv[i] = c * vec[i];
    scaled.insert(word, sv);
  }
  const auto essay = make_essay({"u", "w", "v", "u"});
  const Mat base = embed(essay, table).matrix;
  const Mat big = embed(essay, scaled).matrix;
  for (std::size_t i = 0; i < base.data().size(); ++i) {
    CHECK(big.data()[i] == c * base.data()[i]);
  }
}

TEST_CASE("nearest_neighbor picks the closest other word") {
  const EmbeddingTable table = three_word_table();
  CHECK(nearest_neighbor("a", table, true) == "b");
  CHECK(nearest_neighbor("c", table, true) == "b");
  CHECK_THROWS_AS(nearest_neighbor("zz", table, true), UnknownWordError);
}

TEST_CASE("nearest_neighbor finds a duplicate vector at distance zero") {
  EmbeddingTable table(2);
  table.insert("a", {1.0, 1.0});
  table.insert("b", {1.0, 1.0});
  table.insert("c", {9.0, 9.0});
  CHECK(nearest_neighbor("b", table, false) == "a");
  CHECK(nearest_neighbor("b", table, true) == "a");
}

TEST_CASE("nearest_neighbor breaks ties lexicographically") {
  EmbeddingTable table(2);
  table.insert("a", {0.0, 0.0});
  table.insert("b", {1.0, 0.0});
  table.insert("d", {1.0, 0.0});
  CHECK(nearest_neighbor("a", table, true) == "b");
}

TEST_CASE("nearest_neighbor never returns the query when excluding self") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const std::vector<std::string> words = {"p", "q", "r", "s", "t", "u"};
    const EmbeddingTable table = random_embeddings(seed, words, 3);
    for (const auto& w : words) {
      const std::string nn = nearest_neighbor(w, table, true);
      CHECK(nn != w);
      // Exhaustive check: no other word is strictly closer.
      const double best = distance(*table.find(w), *table.find(nn));
      for (const auto& other : words) {
        if (other == w) continue;
        CHECK(best <= distance(*table.find(w), *table.find(other)) + 1e-15);
      }
    }
  }
}

TEST_CASE("load_embeddings parses the glove-style layout") {
  TempDir dir("emb");
  write_file(dir.file("ok.txt"), "hello 1.0 2.0 3.0\nworld -1 0.5 2\n");
  const EmbeddingLoadResult loaded = load_embeddings(dir.file("ok.txt"));
  CHECK(loaded.table.dim() == 3);
  CHECK(loaded.table.size() == 2);
  CHECK((*loaded.table.find("world"))[0] == -1.0);
  CHECK(loaded.warnings.empty());
}

TEST_CASE("load_embeddings rejects inconsistent dimensions and empty files") {
  TempDir dir("emb_bad");
  write_file(dir.file("ragged.txt"), "a 1 2 3\nb 1 2 3 4\n");
  CHECK_THROWS_AS(load_embeddings(dir.file("ragged.txt")), ParseError);
  write_file(dir.file("empty.txt"), "");
  CHECK_THROWS_AS(load_embeddings(dir.file("empty.txt")), ParseError);
  write_file(dir.file("junk.txt"), "a 1 x 3\n");
  CHECK_THROWS_AS(load_embeddings(dir.file("junk.txt")), ParseError);
}

TEST_CASE("load_embeddings keeps the last duplicate and warns") {
  TempDir dir("emb_dup");
  write_file(dir.file("dup.txt"), "a 1 1\na 2 2\nb 3 3\n");
  const EmbeddingLoadResult loaded = load_embeddings(dir.file("dup.txt"));
  CHECK(loaded.table.size() == 2);
  CHECK((*loaded.table.find("a"))[0] == 2.0);
  REQUIRE(loaded.warnings.size() == 1);
  CHECK(loaded.warnings[0].find("duplicate") != std::string::npos);
}

TEST_CASE("embeddings save then load round-trips exactly") {
  TempDir dir("emb_rt");
  const EmbeddingTable table = random_embeddings(99, {"one", "two", "three"}, 5);
  save_embeddings(table, dir.file("t.txt"));
  const EmbeddingLoadResult loaded = load_embeddings(dir.file("t.txt"));
  CHECK(loaded.table.dim() == table.dim());
  REQUIRE(loaded.table.size() == table.size());
  for (const auto& [word, vec] : table.entries()) {
    REQUIRE(loaded.table.contains(word));
    CHECK(*loaded.table.find(word) == vec);
  }
}
