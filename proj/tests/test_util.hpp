#pragma once

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "corpus.hpp"

namespace test_util {

// Unique scratch directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("essaylens_" + tag + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

inline essaylens::TokenizedEssay make_essay(std::vector<std::string> tokens,
                                            const std::string& id = "t1",
                                            const std::string& prompt = "P1") {
  essaylens::TokenizedEssay essay;
  essay.essay_id = id;
  essay.prompt_id = prompt;
  essay.tokens = std::move(tokens);
  essay.positions.resize(essay.tokens.size());
  for (std::size_t i = 0; i < essay.tokens.size(); ++i) essay.positions[i] = i;
  essay.sentence_spans = essaylens::sentence_spans_for(essay.tokens);
  return essay;
}

}  // namespace test_util
