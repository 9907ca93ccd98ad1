#include "embedding.hpp"

#include <fstream>
#include <sstream>

namespace essaylens {

EmbeddingTable::EmbeddingTable(std::size_t dim) : dim_(dim), oov_(dim, 0.0) {
  if (dim == 0) throw InvalidInputError("embedding dimension must be positive");
}

void EmbeddingTable::insert(const std::string& word, std::vector<double> vec) {
  if (word.empty()) throw InvalidInputError("embedding word must be non-empty");
  if (vec.size() != dim_) {
    throw InvalidInputError("embedding vector for \"" + word + "\" has length " +
                            std::to_string(vec.size()) + ", table dimension is " +
                            std::to_string(dim_));
  }
  vectors_[word] = std::move(vec);
}

const std::vector<double>* EmbeddingTable::find(const std::string& word) const {
  auto it = vectors_.find(word);
  return it == vectors_.end() ? nullptr : &it->second;
}

std::vector<std::string> EmbeddingTable::words() const {
  std::vector<std::string> out;
  out.reserve(vectors_.size());
  for (const auto& [w, _] : vectors_) out.push_back(w);
  return out;
}

EmbeddedEssay embed(const TokenizedEssay& essay, const EmbeddingTable& table) {
  EmbeddedEssay out;
  out.source = essay;
  out.matrix = Mat(essay.tokens.size(), table.dim());
  for (std::size_t t = 0; t < essay.tokens.size(); ++t) {
    const std::vector<double>* vec = table.find(essay.tokens[t]);
    if (vec) {
      for (std::size_t d = 0; d < table.dim(); ++d) out.matrix(t, d) = (*vec)[d];
    }
    // OOV rows stay zero.
  }
  return out;
}

std::string nearest_neighbor(const std::string& word, const EmbeddingTable& table,
                             bool exclude_self) {
  const std::vector<double>* query = table.find(word);
  if (!query) throw UnknownWordError("word \"" + word + "\" is not in the embedding table");
  if (table.size() < 2) {
    throw InvalidInputError("nearest_neighbor needs a table with at least 2 entries");
  }
  const std::string* best = nullptr;
  double best_d2 = 0.0;
  for (const auto& [candidate, vec] : table.entries()) {
    if (exclude_self && candidate == word) continue;
    double d2 = 0.0;
    for (std::size_t d = 0; d < table.dim(); ++d) {
      const double diff = vec[d] - (*query)[d];
      d2 += diff * diff;
    }
    if (!best || d2 < best_d2) {  // map order is lexicographic, so ties keep the smaller word
      best = &candidate;
      best_d2 = d2;
    }
  }
  return *best;
}

EmbeddingLoadResult load_embeddings(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open embedding file " + path);

  std::vector<std::string> warnings;
  std::size_t dim = 0;
  std::map<std::string, std::vector<double>> staged;

  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string word;
    ls >> word;
    std::vector<double> vec;
    double v;
    while (ls >> v) vec.push_back(v);
    const std::string ctx = path + ":" + std::to_string(lineno);
    if (!ls.eof()) throw ParseError(ctx + ": non-numeric vector component");
    if (word.empty() || vec.empty()) throw ParseError(ctx + ": expected \"word v1 ... vd\"");
    if (dim == 0) {
      dim = vec.size();
    } else if (vec.size() != dim) {
      throw ParseError(ctx + ": vector has " + std::to_string(vec.size()) +
                       " components, expected " + std::to_string(dim));
    }
    if (staged.count(word)) {
      warnings.push_back(ctx + ": duplicate word \"" + word + "\", keeping the last entry");
    }
    staged[word] = std::move(vec);
  }
  if (dim == 0) throw ParseError(path + ": embedding file is empty");

  EmbeddingTable table(dim);
  for (auto& [word, vec] : staged) table.insert(word, std::move(vec));
  return {std::move(table), std::move(warnings)};
}

void save_embeddings(const EmbeddingTable& table, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write embedding file " + path);
  for (const auto& [word, vec] : table.entries()) {
    out << word;
    for (double v : vec) out << ' ' << format_double(v);
    out << '\n';
  }
  if (!out) throw IoError("failed writing embedding file " + path);
}

EmbeddingTable random_embeddings(std::uint64_t seed, const std::vector<std::string>& words,
                                 std::size_t dim, double stddev) {
  EmbeddingTable table(dim);
  Rng rng(seed);
  for (const auto& word : words) {
    std::vector<double> vec(dim);
    for (double& v : vec) v = rng.gaussian(0.0, stddev);
    table.insert(word, std::move(vec));
  }
  return table;
}

}  // namespace essaylens
