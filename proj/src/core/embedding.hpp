#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "common.hpp"
#include "corpus.hpp"

namespace essaylens {

// Word -> dense vector map. Entries live in a sorted map so iteration order,
// nearest-neighbor tie-breaks and file output are all reproducible. Words
// absent from the table embed to the zero vector.
class EmbeddingTable {
 public:
  explicit EmbeddingTable(std::size_t dim);

  std::size_t dim() const { return dim_; }
  std::size_t size() const { return vectors_.size(); }

  void insert(const std::string& word, std::vector<double> vec);
  bool contains(const std::string& word) const { return vectors_.count(word) != 0; }
  const std::vector<double>* find(const std::string& word) const;
  const std::vector<double>& oov_vector() const { return oov_; }

  std::vector<std::string> words() const;
  const std::map<std::string, std::vector<double>>& entries() const { return vectors_; }

 private:
  std::size_t dim_;
  std::map<std::string, std::vector<double>> vectors_;
  std::vector<double> oov_;
};

struct EmbeddedEssay {
  Mat matrix;  // one row per token
  TokenizedEssay source;
};

EmbeddedEssay embed(const TokenizedEssay& essay, const EmbeddingTable& table);

// Closest other vocabulary word by Euclidean distance; ties go to the
// lexicographically smaller word. With exclude_self the query word itself is
// never a candidate. Throws UnknownWordError if the query is not in the table.
std::string nearest_neighbor(const std::string& word, const EmbeddingTable& table,
                             bool exclude_self);

struct EmbeddingLoadResult {
  EmbeddingTable table;
  std::vector<std::string> warnings;
};

// Glove-style text layout: "word v1 v2 ... vd" per line. Inconsistent
// dimensions abort; duplicate words keep the last entry with a warning.
EmbeddingLoadResult load_embeddings(const std::string& path);
void save_embeddings(const EmbeddingTable& table, const std::string& path);

// Seeded gaussian vectors for the given words, for tests and demos.
EmbeddingTable random_embeddings(std::uint64_t seed, const std::vector<std::string>& words,
                                 std::size_t dim, double stddev = 1.0);

}  // namespace essaylens
