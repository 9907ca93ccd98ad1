#include "report.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace essaylens {

using nlohmann::json;

namespace {

void write_text_file(const std::string& path, const std::string& content) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << content;
  if (!out) throw IoError("failed writing " + path);
}

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ParseError(path + ": " + e.what());
  }
  return j;
}

json evaluation_to_json(const EssayEvaluation& eval) {
  json side;
  side["tokens"] = eval.essay.tokens;
  side["scaled"] = eval.score.scaled;
  side["raw"] = eval.score.raw;
  side["per_token"] = eval.attribution.per_token;
  side["completeness_error"] = eval.attribution.completeness_error;
  side["completeness_ok"] = eval.completeness_ok;
  return side;
}

std::string csv_quote(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string quoted = "\"";
  for (char c : field) {
    if (c == '"') quoted += "\"\"";
    else quoted.push_back(c);
  }
  quoted.push_back('"');
  return quoted;
}

std::string safe_filename(const std::string& id) {
  std::string out;
  for (char c : id) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '-' || c == '_';
    out.push_back(ok ? c : '_');
  }
  return out.empty() ? "essay" : out;
}

}  // namespace

std::string html_escape(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string render_heatmap_html(const TokenizedEssay& essay, const AttributionVector& attr,
                                const ScaledScore& score) {
  if (essay.tokens.size() != attr.per_token.size()) {
    throw InvalidInputError("heatmap: token count does not match attribution length");
  }
  double max_abs = 0.0;
  for (double v : attr.per_token) max_abs = std::max(max_abs, std::fabs(v));

  std::ostringstream html;
  html << "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n"
       << "<title>essay " << html_escape(essay.essay_id) << "</title>\n"
       << "<style>\n"
       << "body{font-family:Georgia,serif;max-width:56em;margin:2em auto;line-height:1.9}\n"
       << ".meta{color:#555;font-family:sans-serif;font-size:0.9em}\n"
       << ".tok{padding:1px 3px;border-radius:3px;display:inline-block;margin:0 1px}\n"
       << "</style>\n</head>\n<body>\n"
       << "<h1>Essay " << html_escape(essay.essay_id) << "</h1>\n"
       << "<p class=\"meta\">prompt " << html_escape(essay.prompt_id) << " &middot; score "
       << format_fixed(score.scaled, 3) << " (raw " << format_fixed(score.raw, 4)
       << ", rubric " << score.rubric.min_score << ".." << score.rubric.max_score
       << ") &middot; completeness error " << format_double(attr.completeness_error)
       << "</p>\n<p class=\"essay\">";
  for (std::size_t t = 0; t < essay.tokens.size(); ++t) {
    const double v = attr.per_token[t];
    if (t) html << ' ';
    if (v == 0.0 || max_abs == 0.0) {
      html << "<span class=\"tok\">" << html_escape(essay.tokens[t]) << "</span>";
    } else {
      const double alpha = std::fabs(v) / max_abs;
      const char* rgb = v > 0.0 ? "26,137,23" : "196,30,58";
      html << "<span class=\"tok\" style=\"background-color:rgba(" << rgb << ','
           << format_fixed(alpha, 3) << ")\" title=\"" << format_double(v) << "\">"
           << html_escape(essay.tokens[t]) << "</span>";
    }
  }
  html << "</p>\n</body>\n</html>\n";
  return html.str();
}

void write_attribution_json(const std::string& path, const LabeledCorpus& corpus,
                            const CorpusAttribution& attribution) {
  if (corpus.essays.size() != attribution.vectors.size()) {
    throw InvalidInputError("attribution result does not match the corpus");
  }
  json doc;
  doc["schema"] = "essaylens.attributions.v1";
  doc["essays"] = json::array();
  for (std::size_t i = 0; i < corpus.essays.size(); ++i) {
    const auto& essay = corpus.essays[i].essay;
    const auto& attr = attribution.vectors[i];
    const auto& score = attribution.scores[i];
    json entry;
    entry["essay_id"] = essay.essay_id;
    entry["prompt_id"] = essay.prompt_id;
    entry["human_score"] = corpus.essays[i].human_score;
    entry["tokens"] = essay.tokens;
    entry["per_token"] = attr.per_token;
    entry["raw_delta"] = attr.raw_delta;
    entry["completeness_error"] = attr.completeness_error;
    entry["completeness_ok"] = attr.completeness_error <= attr.config.completeness_tolerance;
    entry["raw_score"] = score.raw;
    entry["scaled_score"] = score.scaled;
    entry["rubric"] = {{"min", score.rubric.min_score}, {"max", score.rubric.max_score}};
    doc["essays"].push_back(std::move(entry));
  }
  doc["config"] = {{"steps", attribution.vectors.empty() ? 0 : attribution.vectors[0].config.steps},
                   {"rule", attribution.vectors.empty()
                                ? "midpoint"
                                : rule_name(attribution.vectors[0].config.rule)},
                   {"tolerance", attribution.vectors.empty()
                                     ? 0.05
                                     : attribution.vectors[0].config.completeness_tolerance}};
  doc["violations"] = attribution.violation_indices;

  auto words_to_json = [](const std::vector<std::pair<std::string, WordStat>>& list) {
    json arr = json::array();
    for (const auto& [word, stat] : list) {
      arr.push_back({{"word", word},
                     {"count", stat.count},
                     {"mean", stat.mean},
                     {"mean_abs", stat.mean_abs}});
    }
    return arr;
  };
  doc["top_positive_words"] = words_to_json(top_positive_words(attribution.word_stats, 10));
  doc["top_negative_words"] = words_to_json(top_negative_words(attribution.word_stats, 10));
  doc["least_attributed_words"] =
      words_to_json(least_attributed_words(attribution.word_stats, 10));

  write_text_file(path, doc.dump(2) + "\n");
}

void write_word_stats_csv(const std::string& path,
                          const std::map<std::string, WordStat>& stats) {
  std::ostringstream out;
  out << "# schema: essaylens.word_stats.v1\n";
  out << "word,count,mean_attribution,mean_abs_attribution\n";
  for (const auto& [word, stat] : stats) {
    out << csv_quote(word) << ',' << stat.count << ',' << format_double(stat.mean) << ','
        << format_double(stat.mean_abs) << '\n';
  }
  write_text_file(path, out.str());
}

void write_outcomes_json(const std::string& path, const LabeledCorpus& corpus,
                         const BatteryRun& run) {
  json doc;
  doc["schema"] = "essaylens.outcomes.v1";
  doc["strategy"] = run.strategy;
  doc["seed"] = run.seed;
  doc["outcomes"] = json::array();
  for (std::size_t o = 0; o < run.outcomes.size(); ++o) {
    const PerturbationOutcome& outcome = run.outcomes[o];
    const auto& entry = corpus.essays[run.essay_index[o]];
    json rec;
    rec["essay_id"] = entry.essay.essay_id;
    rec["prompt_id"] = entry.essay.prompt_id;
    rec["human_score"] = entry.human_score;
    json strategy;
    strategy["name"] = outcome.strategy.name;
    if (outcome.strategy.fraction >= 0.0) {
      strategy["fraction"] = outcome.strategy.fraction;
    } else {
      strategy["fraction"] = nullptr;
    }
    json params = json::object();
    for (const auto& [k, v] : outcome.strategy.params) params[k] = v;
    strategy["params"] = std::move(params);
    rec["strategy"] = std::move(strategy);
    if (outcome.seed) {
      rec["seed"] = *outcome.seed;
    } else {
      rec["seed"] = nullptr;
    }
    rec["rubric"] = {{"min", outcome.original.score.rubric.min_score},
                     {"max", outcome.original.score.rubric.max_score}};
    rec["original"] = evaluation_to_json(outcome.original);
    rec["perturbed"] = evaluation_to_json(outcome.perturbed);
    rec["index_map"] = outcome.index_map;
    rec["injected"] = outcome.injected;
    doc["outcomes"].push_back(std::move(rec));
  }
  doc["skipped"] = run.skipped;
  write_text_file(path, doc.dump(2) + "\n");
}

void write_impact_report(const std::string& csv_path, const std::string& json_path,
                         const std::string& outcomes_json_path) {
  const json doc = load_json_file(outcomes_json_path);
  if (!doc.contains("outcomes") || !doc["outcomes"].is_array()) {
    throw ParseError(outcomes_json_path + ": missing outcomes array");
  }

  struct Row {
    std::string essay_id;
    std::string prompt_id;
    double fraction = -1.0;
    double original = 0.0;
    double perturbed = 0.0;
    double churn_top20 = 0.0;
    double sign_flip_top20 = 0.0;
    bool has_churn = false;
  };
  struct Group {
    Rubric rubric;
    std::vector<double> original;
    std::vector<double> perturbed;
    std::vector<double> churns;
    std::vector<double> sign_flips;
  };
  std::vector<Row> rows;
  std::map<std::pair<std::string, double>, Group> groups;

  for (const auto& rec : doc["outcomes"]) {
    Row row;
    row.essay_id = rec.at("essay_id").get<std::string>();
    row.prompt_id = rec.at("prompt_id").get<std::string>();
    if (!rec.at("strategy").at("fraction").is_null()) {
      row.fraction = rec.at("strategy").at("fraction").get<double>();
    }
    row.original = rec.at("original").at("scaled").get<double>();
    row.perturbed = rec.at("perturbed").at("scaled").get<double>();

    Rubric rubric;
    rubric.prompt_id = row.prompt_id;
    rubric.min_score = rec.at("rubric").at("min").get<long>();
    rubric.max_score = rec.at("rubric").at("max").get<long>();

    AttributionVector before, after;
    before.per_token = rec.at("original").at("per_token").get<std::vector<double>>();
    after.per_token = rec.at("perturbed").at("per_token").get<std::vector<double>>();
    const auto index_map = rec.at("index_map").get<std::vector<long>>();
    if (!before.per_token.empty() && index_map.size() == after.per_token.size()) {
      row.churn_top20 = attribution_churn(rank(before), rank(after), 0.2, index_map);
      row.sign_flip_top20 = sign_flip_churn(before, after, 0.2, index_map);
      row.has_churn = true;
    }

    Group& g = groups[{row.prompt_id, row.fraction}];
    g.rubric = rubric;
    g.original.push_back(row.original);
    g.perturbed.push_back(row.perturbed);
    if (row.has_churn) {
      g.churns.push_back(row.churn_top20);
      g.sign_flips.push_back(row.sign_flip_top20);
    }
    rows.push_back(std::move(row));
  }

  auto mean_of = [](const std::vector<double>& v) {
    if (v.empty()) return 0.0;
    double total = 0.0;
    for (double x : v) total += x;
    return total / static_cast<double>(v.size());
  };

  std::ostringstream csv;
  csv << "# schema: essaylens.impact.v1\n";
  csv << "kind,prompt_id,fraction,essay_id,original,perturbed,diff,churn_top20,sign_flip_top20,"
         "mu_pos,mu_neg,n_pos,n_neg,sigma,n_samples\n";
  for (const Row& row : rows) {
    csv << "essay," << csv_quote(row.prompt_id) << ','
        << (row.fraction >= 0.0 ? format_double(row.fraction) : "") << ','
        << csv_quote(row.essay_id) << ',' << format_fixed(row.original, 6) << ','
        << format_fixed(row.perturbed, 6) << ',' << format_fixed(row.perturbed - row.original, 6)
        << ',' << (row.has_churn ? format_fixed(row.churn_top20, 4) : "")
        << ',' << (row.has_churn ? format_fixed(row.sign_flip_top20, 4) : "") << ",,,,,,\n";
  }

  json summary_json = json::array();
  for (const auto& [key, group] : groups) {
    const ImpactStats stats = impact_stats(group.original, group.perturbed, group.rubric);
    csv << "summary," << csv_quote(key.first) << ','
        << (key.second >= 0.0 ? format_double(key.second) : "") << ",,,,,"
        << format_fixed(mean_of(group.churns), 4) << ',' << format_fixed(mean_of(group.sign_flips), 4)
        << ',' << format_fixed(stats.mu_pos, 4) << ',' << format_fixed(stats.mu_neg, 4) << ','
        << format_fixed(stats.n_pos, 4) << ',' << format_fixed(stats.n_neg, 4) << ','
        << format_fixed(stats.sigma, 4) << ',' << stats.n_samples << '\n';

    json s;
    s["prompt_id"] = key.first;
    if (key.second >= 0.0) {
      s["fraction"] = key.second;
    } else {
      s["fraction"] = nullptr;
    }
    s["mu_pos"] = stats.mu_pos;
    s["mu_neg"] = stats.mu_neg;
    s["n_pos"] = stats.n_pos;
    s["n_neg"] = stats.n_neg;
    s["sigma"] = stats.sigma;
    s["n_samples"] = stats.n_samples;
    s["mean_churn_top20"] = mean_of(group.churns);
    s["mean_sign_flip_top20"] = mean_of(group.sign_flips);
    summary_json.push_back(std::move(s));
  }
  write_text_file(csv_path, csv.str());

  if (!json_path.empty()) {
    json out;
    out["schema"] = "essaylens.impact.v1";
    out["strategy"] = doc.value("strategy", "");
    out["summary"] = std::move(summary_json);
    write_text_file(json_path, out.dump(2) + "\n");
  }
}

void write_scores_csv(const std::string& path, const LabeledCorpus& corpus,
                      const std::vector<ScaledScore>& scores) {
  if (corpus.essays.size() != scores.size()) {
    throw InvalidInputError("score list does not match the corpus");
  }
  std::ostringstream out;
  out << "# schema: essaylens.scores.v1\n";
  out << "essay_id,prompt_id,human_score,raw,scaled,rounded\n";
  for (std::size_t i = 0; i < corpus.essays.size(); ++i) {
    const auto& entry = corpus.essays[i];
    out << csv_quote(entry.essay.essay_id) << ',' << csv_quote(entry.essay.prompt_id) << ','
        << entry.human_score << ',' << format_fixed(scores[i].raw, 6) << ','
        << format_fixed(scores[i].scaled, 6) << ',' << round_score(scores[i].scaled) << '\n';
  }
  write_text_file(path, out.str());
}

namespace {

void append_curve_rows(std::ostream& out, const std::string& prompt_id, const std::string& mode,
                       const std::vector<CurvePoint>& points) {
  for (const CurvePoint& p : points) {
    out << csv_quote(prompt_id) << ',' << csv_quote(mode) << ',' << format_double(p.fraction)
        << ',' << format_fixed(p.qwk, 6) << ',' << format_fixed(p.baseline_qwk, 6) << ','
        << (std::isfinite(p.relative_qwk) ? format_fixed(p.relative_qwk, 6) : "nan") << ','
        << p.n_samples << '\n';
  }
}

constexpr const char* kCurveHeader =
    "# schema: essaylens.curve.v1\n"
    "prompt_id,mode,fraction,qwk,baseline_qwk,relative_qwk,n_samples\n";

}  // namespace

void write_curve_csv(const std::string& path, const std::string& prompt_id,
                     const std::string& mode, const std::vector<CurvePoint>& points) {
  std::ostringstream out;
  out << kCurveHeader;
  append_curve_rows(out, prompt_id, mode, points);
  write_text_file(path, out.str());
}

void write_curve_csv_multi(
    const std::string& path,
    const std::vector<std::pair<std::string, std::vector<CurvePoint>>>& prompts,
    const std::string& mode) {
  std::ostringstream out;
  out << kCurveHeader;
  for (const auto& [prompt_id, points] : prompts) {
    append_curve_rows(out, prompt_id, mode, points);
  }
  write_text_file(path, out.str());
}

void write_recovery_csv(const std::string& path, const LabeledCorpus& corpus,
                        const std::vector<double>& fractions, double tolerance) {
  if (corpus.essays.size() != fractions.size()) {
    throw InvalidInputError("recovery list does not match the corpus");
  }
  std::ostringstream out;
  out << "# schema: essaylens.recovery.v1\n";
  out << "kind,essay_id,prompt_id,recovery_fraction,tolerance\n";
  double total = 0.0;
  for (std::size_t i = 0; i < corpus.essays.size(); ++i) {
    out << "essay," << csv_quote(corpus.essays[i].essay.essay_id) << ','
        << csv_quote(corpus.essays[i].essay.prompt_id) << ',' << format_fixed(fractions[i], 6)
        << ',' << format_double(tolerance) << '\n';
    total += fractions[i];
  }
  out << "summary,,," << format_fixed(total / static_cast<double>(fractions.size()), 6) << ','
      << format_double(tolerance) << '\n';
  write_text_file(path, out.str());
}

void write_loss_csv(const std::string& path, const std::vector<double>& losses) {
  std::ostringstream out;
  out << "# schema: essaylens.loss.v1\n";
  out << "epoch,mse\n";
  for (std::size_t e = 0; e < losses.size(); ++e) {
    out << e << ',' << format_double(losses[e]) << '\n';
  }
  write_text_file(path, out.str());
}

namespace {

std::string render_curve_svg(const std::string& curve_csv_path) {
  std::ifstream in(curve_csv_path);
  if (!in) throw IoError("cannot open " + curve_csv_path);
  std::string line;
  std::vector<std::pair<double, double>> pts;  // fraction, relative_qwk
  std::string mode;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("prompt_id,", 0) == 0) continue;
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
    if (fields.size() < 7) continue;
    if (mode.empty()) mode = fields[1];
    const double rel = std::strtod(fields[5].c_str(), nullptr);
    if (!std::isfinite(rel)) continue;
    pts.emplace_back(std::strtod(fields[2].c_str(), nullptr), rel);
  }
  if (pts.empty()) return "";

  const double width = 480.0, height = 260.0, pad = 40.0;
  double ymin = 0.0, ymax = 1.0;
  for (const auto& [_, y] : pts) {
    ymin = std::min(ymin, y);
    ymax = std::max(ymax, y);
  }
  if (ymax == ymin) ymax = ymin + 1.0;
  auto sx = [&](double f) { return pad + f * (width - 2 * pad); };
  auto sy = [&](double y) { return height - pad - (y - ymin) / (ymax - ymin) * (height - 2 * pad); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"#fafafa\"/>\n";
  svg << "<line x1=\"" << pad << "\" y1=\"" << height - pad << "\" x2=\"" << width - pad
      << "\" y2=\"" << height - pad << "\" stroke=\"#888\"/>\n";
  svg << "<line x1=\"" << pad << "\" y1=\"" << pad << "\" x2=\"" << pad << "\" y2=\""
      << height - pad << "\" stroke=\"#888\"/>\n";
  svg << "<polyline fill=\"none\" stroke=\"#1a8917\" stroke-width=\"2\" points=\"";
  for (const auto& [f, y] : pts) svg << format_fixed(sx(f), 1) << ',' << format_fixed(sy(y), 1) << ' ';
  svg << "\"/>\n";
  for (const auto& [f, y] : pts) {
    svg << "<circle cx=\"" << format_fixed(sx(f), 1) << "\" cy=\"" << format_fixed(sy(y), 1)
        << "\" r=\"3\" fill=\"#1a8917\"/>\n";
  }
  svg << "<text x=\"" << width / 2 << "\" y=\"" << height - 8
      << "\" text-anchor=\"middle\" font-size=\"12\">fraction (" << html_escape(mode)
      << ")</text>\n";
  svg << "<text x=\"12\" y=\"" << height / 2
      << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 12 " << height / 2
      << ")\">relative QWK</text>\n";
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace

void render_report_dir(const std::string& out_dir, const std::string& attribution_json_path,
                       const std::string& curve_csv_path) {
  const json doc = load_json_file(attribution_json_path);
  if (!doc.contains("essays") || !doc["essays"].is_array()) {
    throw ParseError(attribution_json_path + ": missing essays array");
  }
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);

  std::ostringstream index;
  index << "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n"
        << "<title>attribution report</title>\n"
        << "<style>body{font-family:sans-serif;max-width:56em;margin:2em auto}"
        << "table{border-collapse:collapse}td,th{border:1px solid #ccc;padding:4px 10px}"
        << "</style>\n</head>\n<body>\n<h1>Attribution report</h1>\n";

  if (!curve_csv_path.empty()) {
    const std::string svg = render_curve_svg(curve_csv_path);
    if (!svg.empty()) index << "<h2>Relative QWK</h2>\n" << svg;
  }

  index << "<h2>Essays</h2>\n<table>\n"
        << "<tr><th>essay</th><th>prompt</th><th>score</th><th>completeness error</th></tr>\n";

  for (const auto& rec : doc["essays"]) {
    TokenizedEssay essay;
    essay.essay_id = rec.at("essay_id").get<std::string>();
    essay.prompt_id = rec.at("prompt_id").get<std::string>();
    essay.tokens = rec.at("tokens").get<std::vector<std::string>>();

    AttributionVector attr;
    attr.per_token = rec.at("per_token").get<std::vector<double>>();
    attr.raw_delta = rec.value("raw_delta", 0.0);
    attr.completeness_error = rec.value("completeness_error", 0.0);

    ScaledScore score;
    score.raw = rec.value("raw_score", 0.0);
    score.scaled = rec.value("scaled_score", 0.0);
    score.rubric.prompt_id = essay.prompt_id;
    score.rubric.min_score = rec.at("rubric").at("min").get<long>();
    score.rubric.max_score = rec.at("rubric").at("max").get<long>();

    const std::string page = "essay_" + safe_filename(essay.essay_id) + ".html";
    write_text_file(out_dir + "/" + page, render_heatmap_html(essay, attr, score));

    index << "<tr><td><a href=\"" << page << "\">" << html_escape(essay.essay_id)
          << "</a></td><td>" << html_escape(essay.prompt_id) << "</td><td>"
          << format_fixed(score.scaled, 3) << "</td><td>"
          << format_double(attr.completeness_error) << "</td></tr>\n";
  }
  index << "</table>\n";

  auto word_list = [&](const char* key, const char* title) {
    if (!doc.contains(key) || doc[key].empty()) return;
    index << "<h2>" << title << "</h2>\n<ul>\n";
    for (const auto& w : doc[key]) {
      index << "<li>" << html_escape(w.at("word").get<std::string>()) << " (mean "
            << format_double(w.at("mean").get<double>()) << ", n " << w.at("count").get<std::size_t>()
            << ")</li>\n";
    }
    index << "</ul>\n";
  };
  word_list("top_positive_words", "Top positively attributed words");
  word_list("top_negative_words", "Top negatively attributed words");
  word_list("least_attributed_words", "Mostly unattributed words");

  index << "</body>\n</html>\n";
  write_text_file(out_dir + "/index.html", index.str());
}

}  // namespace essaylens
