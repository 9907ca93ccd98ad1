#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "common.hpp"

namespace essaylens {

// An essay as an ordered token sequence. `positions` carries the index each
// token had in the essay it was derived from, so perturbations that drop or
// reorder tokens stay traceable. Fresh tokenizations use 0..n-1.
struct TokenizedEssay {
  std::string essay_id;
  std::string prompt_id;
  std::vector<std::string> tokens;
  std::vector<std::size_t> positions;
  std::vector<std::pair<std::size_t, std::size_t>> sentence_spans;  // [begin, end)

  std::size_t size() const { return tokens.size(); }
  bool empty() const { return tokens.empty(); }

  bool operator==(const TokenizedEssay& o) const = default;
};

struct Rubric {
  std::string prompt_id;
  long min_score = 0;
  long max_score = 1;

  long range() const { return max_score - min_score; }
  bool operator==(const Rubric& o) const = default;
};

struct LabeledEssay {
  TokenizedEssay essay;
  long human_score = 0;

  bool operator==(const LabeledEssay& o) const = default;
};

struct LabeledCorpus {
  std::vector<LabeledEssay> essays;
  std::map<std::string, Rubric> rubrics;

  std::size_t size() const { return essays.size(); }
  const Rubric& rubric_for(const std::string& prompt_id) const;

  bool operator==(const LabeledCorpus& o) const = default;
};

// Lowercases, splits on whitespace and detaches .,!?;:'" into their own
// tokens. Sentences close after . ! ? with any trailing text forming a final
// sentence. Throws EmptyEssayError when no token survives.
TokenizedEssay tokenize(const std::string& text);

// Sentence segmentation rule applied to an existing token sequence.
std::vector<std::pair<std::size_t, std::size_t>> sentence_spans_for(
    const std::vector<std::string>& tokens);

// Inverse of tokenize up to whitespace: joins tokens with single spaces.
std::string detokenize(const TokenizedEssay& essay);

std::map<std::string, Rubric> load_rubrics(const std::string& path);
void save_rubrics(const std::map<std::string, Rubric>& rubrics, const std::string& path);

// TSV with header columns essay_id, prompt_id, score, text (any order).
// Any malformed row aborts the load with a message naming the line.
LabeledCorpus load_corpus(const std::string& corpus_path, const std::string& rubric_path);
void save_corpus(const LabeledCorpus& corpus, const std::string& path);

struct SyntheticSpec {
  std::uint64_t seed = 0;
  std::size_t n_essays = 1;
  std::map<std::string, double> keyword_weights;
  double length_coeff = 0.0;
  Rubric rubric;
  std::size_t min_words = 20;   // word tokens per essay, excluding terminators
  std::size_t max_words = 60;
  bool punctuate = true;        // insert '.' terminators every few words
  std::string id_prefix = "synth";
};

// Ground-truth score of the synthetic scoring function:
// clamp(round(sum of keyword weights + length_coeff * token count)).
long synthetic_score(const std::vector<std::string>& tokens,
                     const std::map<std::string, double>& keyword_weights,
                     double length_coeff, const Rubric& rubric);

// Random word-sequence essays labeled by synthetic_score. Deterministic in
// the seed; `vocabulary` supplies the sampled words.
LabeledCorpus generate_synthetic_corpus(const SyntheticSpec& spec,
                                        const std::vector<std::string>& vocabulary);

}  // namespace essaylens
