#include "corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

namespace essaylens {

namespace {

bool is_space_char(char c) {
  return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
}

bool is_detachable(char c) {
  return c == '.' || c == ',' || c == '!' || c == '?' || c == ';' || c == ':' ||
         c == '\'' || c == '"';
}

bool is_terminator(const std::string& tok) {
  return tok == "." || tok == "!" || tok == "?";
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == '\t') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

long parse_long(const std::string& s, const std::string& context) {
  long value = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ParseError(context + ": cannot parse integer from \"" + s + "\"");
  }
  return value;
}

}  // namespace

const Rubric& LabeledCorpus::rubric_for(const std::string& prompt_id) const {
  auto it = rubrics.find(prompt_id);
  if (it == rubrics.end()) {
    throw OutOfRangeError("no rubric for prompt \"" + prompt_id + "\"");
  }
  return it->second;
}

std::vector<std::pair<std::size_t, std::size_t>> sentence_spans_for(
    const std::vector<std::string>& tokens) {
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  std::size_t begin = 0;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (is_terminator(tokens[i])) {
      spans.emplace_back(begin, i + 1);
      begin = i + 1;
    }
  }
  if (begin < tokens.size()) spans.emplace_back(begin, tokens.size());
  return spans;
}

TokenizedEssay tokenize(const std::string& text) {
  TokenizedEssay essay;
  std::string cur;
  auto flush = [&]() {
    if (!cur.empty()) {
      essay.tokens.push_back(cur);
      cur.clear();
    }
  };
  for (char raw : text) {
    if (is_space_char(raw)) {
      flush();
    } else if (is_detachable(raw)) {
      flush();
      essay.tokens.emplace_back(1, raw);
    } else {
      char c = raw;
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
      cur.push_back(c);
    }
  }
  flush();
  if (essay.tokens.empty()) {
    throw EmptyEssayError("tokenize: text has no tokens");
  }
  essay.positions.resize(essay.tokens.size());
  for (std::size_t i = 0; i < essay.tokens.size(); ++i) essay.positions[i] = i;
  essay.sentence_spans = sentence_spans_for(essay.tokens);
  return essay;
}

std::string detokenize(const TokenizedEssay& essay) {
  std::string out;
  for (std::size_t i = 0; i < essay.tokens.size(); ++i) {
    if (i) out.push_back(' ');
    out += essay.tokens[i];
  }
  return out;
}

std::map<std::string, Rubric> load_rubrics(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open rubric file " + path);
  std::map<std::string, Rubric> rubrics;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    std::istringstream ls(line);
    Rubric r;
    std::string min_s, max_s, extra;
    if (!(ls >> r.prompt_id >> min_s >> max_s)) {
      throw ParseError(path + ":" + std::to_string(lineno) +
                       ": expected \"prompt_id min max\"");
    }
    if (ls >> extra) {
      throw ParseError(path + ":" + std::to_string(lineno) + ": trailing field \"" + extra + "\"");
    }
    const std::string ctx = path + ":" + std::to_string(lineno);
    r.min_score = parse_long(min_s, ctx);
    r.max_score = parse_long(max_s, ctx);
    if (r.min_score >= r.max_score) {
      throw ParseError(ctx + ": rubric min must be below max, got " + min_s + ".." + max_s);
    }
    if (rubrics.count(r.prompt_id)) {
      throw ParseError(ctx + ": duplicate rubric for prompt \"" + r.prompt_id + "\"");
    }
    rubrics[r.prompt_id] = r;
  }
  if (rubrics.empty()) throw ParseError(path + ": no rubrics found");
  return rubrics;
}

void save_rubrics(const std::map<std::string, Rubric>& rubrics, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write rubric file " + path);
  for (const auto& [prompt, r] : rubrics) {
    out << prompt << ' ' << r.min_score << ' ' << r.max_score << '\n';
  }
  if (!out) throw IoError("failed writing rubric file " + path);
}

LabeledCorpus load_corpus(const std::string& corpus_path, const std::string& rubric_path) {
  LabeledCorpus corpus;
  corpus.rubrics = load_rubrics(rubric_path);

  std::ifstream in(corpus_path);
  if (!in) throw IoError("cannot open corpus file " + corpus_path);

  std::string line;
  if (!std::getline(in, line)) throw ParseError(corpus_path + ": missing header row");
  const auto header = split_tabs(strip_cr(line));
  auto col = [&](const std::string& name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw ParseError(corpus_path + ": header is missing column \"" + name + "\"");
    }
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t id_col = col("essay_id");
  const std::size_t prompt_col = col("prompt_id");
  const std::size_t score_col = col("score");
  const std::size_t text_col = col("text");

  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    const std::string ctx = corpus_path + ":" + std::to_string(lineno);
    if (fields.size() != header.size()) {
      throw ParseError(ctx + ": expected " + std::to_string(header.size()) + " fields, got " +
                       std::to_string(fields.size()));
    }
    LabeledEssay entry;
    entry.human_score = parse_long(fields[score_col], ctx);
    const std::string& prompt = fields[prompt_col];
    auto rit = corpus.rubrics.find(prompt);
    if (rit == corpus.rubrics.end()) {
      throw ParseError(ctx + ": no rubric for prompt \"" + prompt + "\"");
    }
    const Rubric& rubric = rit->second;
    if (entry.human_score < rubric.min_score || entry.human_score > rubric.max_score) {
      throw ParseError(ctx + ": score " + fields[score_col] + " outside rubric range " +
                       std::to_string(rubric.min_score) + ".." +
                       std::to_string(rubric.max_score));
    }
    try {
      entry.essay = tokenize(fields[text_col]);
    } catch (const EmptyEssayError&) {
      throw ParseError(ctx + ": essay text is empty");
    }
    entry.essay.essay_id = fields[id_col];
    entry.essay.prompt_id = prompt;
    corpus.essays.push_back(std::move(entry));
  }
  return corpus;
}

void save_corpus(const LabeledCorpus& corpus, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write corpus file " + path);
  out << "essay_id\tprompt_id\tscore\ttext\n";
  for (const auto& entry : corpus.essays) {
    out << entry.essay.essay_id << '\t' << entry.essay.prompt_id << '\t' << entry.human_score
        << '\t' << detokenize(entry.essay) << '\n';
  }
  if (!out) throw IoError("failed writing corpus file " + path);
}

long synthetic_score(const std::vector<std::string>& tokens,
                     const std::map<std::string, double>& keyword_weights,
                     double length_coeff, const Rubric& rubric) {
  double total = length_coeff * static_cast<double>(tokens.size());
  for (const auto& tok : tokens) {
    auto it = keyword_weights.find(tok);
    if (it != keyword_weights.end()) total += it->second;
  }
  long rounded = std::llround(total);
  return std::clamp(rounded, rubric.min_score, rubric.max_score);
}

LabeledCorpus generate_synthetic_corpus(const SyntheticSpec& spec,
                                        const std::vector<std::string>& vocabulary) {
  if (vocabulary.empty()) throw InvalidInputError("synthetic corpus needs a non-empty vocabulary");
  if (spec.n_essays == 0) throw InvalidInputError("synthetic corpus needs n_essays >= 1");
  if (spec.min_words == 0 || spec.min_words > spec.max_words) {
    throw InvalidInputError("synthetic corpus needs 1 <= min_words <= max_words");
  }
  if (spec.rubric.min_score >= spec.rubric.max_score) {
    throw InvalidInputError("synthetic corpus rubric must have min < max");
  }

  Rng rng(spec.seed);
  LabeledCorpus corpus;
  corpus.rubrics[spec.rubric.prompt_id] = spec.rubric;

  for (std::size_t e = 0; e < spec.n_essays; ++e) {
    const std::size_t n_words =
        spec.min_words + rng.below(spec.max_words - spec.min_words + 1);
    TokenizedEssay essay;
    std::size_t words_in_sentence = 0;
    std::size_t sentence_target = spec.punctuate ? 5 + rng.below(8) : 0;
    for (std::size_t w = 0; w < n_words; ++w) {
      essay.tokens.push_back(vocabulary[rng.below(vocabulary.size())]);
      if (spec.punctuate && ++words_in_sentence >= sentence_target && w + 1 < n_words) {
        essay.tokens.push_back(".");
        words_in_sentence = 0;
        sentence_target = 5 + rng.below(8);
      }
    }
    if (spec.punctuate) essay.tokens.push_back(".");

    essay.positions.resize(essay.tokens.size());
    for (std::size_t i = 0; i < essay.tokens.size(); ++i) essay.positions[i] = i;
    essay.sentence_spans = sentence_spans_for(essay.tokens);

    char id[64];
    std::snprintf(id, sizeof(id), "%s-%04zu", spec.id_prefix.c_str(), e);
    essay.essay_id = id;
    essay.prompt_id = spec.rubric.prompt_id;

    LabeledEssay entry;
    entry.human_score =
        synthetic_score(essay.tokens, spec.keyword_weights, spec.length_coeff, spec.rubric);
    entry.essay = std::move(essay);
    corpus.essays.push_back(std::move(entry));
  }
  return corpus;
}

}  // namespace essaylens
