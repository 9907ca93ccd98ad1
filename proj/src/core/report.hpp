#pragma once

#include <string>
#include <vector>

#include "attribution.hpp"
#include "corpus.hpp"
#include "metrics.hpp"
#include "perturb.hpp"
#include "scorer.hpp"

namespace essaylens {

// Self-contained HTML fragment-per-essay document: tokens tinted green for
// positive and red for negative attribution, intensity normalized by the
// essay's largest |attribution|. Zero attribution renders unhighlighted.
std::string render_heatmap_html(const TokenizedEssay& essay, const AttributionVector& attr,
                                const ScaledScore& score);

// Attribution artifact: schema attributions.v1, one record per essay with
// tokens, per-token values, completeness error and the scaled score.
void write_attribution_json(const std::string& path, const LabeledCorpus& corpus,
                            const CorpusAttribution& attribution);

void write_word_stats_csv(const std::string& path,
                          const std::map<std::string, WordStat>& stats);

// Outcome artifact: schema outcomes.v1.
void write_outcomes_json(const std::string& path, const LabeledCorpus& corpus,
                         const BatteryRun& run);

// Per-essay score rows plus per-prompt/fraction summary rows with the impact
// statistics; schema impact.v1. Also emitted as JSON when json_path is
// non-empty.
void write_impact_report(const std::string& csv_path, const std::string& json_path,
                         const std::string& outcomes_json_path);

void write_scores_csv(const std::string& path, const LabeledCorpus& corpus,
                      const std::vector<ScaledScore>& scores);

void write_curve_csv(const std::string& path, const std::string& prompt_id,
                     const std::string& mode, const std::vector<CurvePoint>& points);

// Multi-prompt variant: one row block per (prompt, points) entry.
void write_curve_csv_multi(
    const std::string& path,
    const std::vector<std::pair<std::string, std::vector<CurvePoint>>>& prompts,
    const std::string& mode);

void write_recovery_csv(const std::string& path, const LabeledCorpus& corpus,
                        const std::vector<double>& fractions, double tolerance);

void write_loss_csv(const std::string& path, const std::vector<double>& losses);

// Renders heatmap pages (essay_<id>.html) plus an index.html from an
// attribution JSON artifact; optionally inlines a curve CSV as an SVG chart.
void render_report_dir(const std::string& out_dir, const std::string& attribution_json_path,
                       const std::string& curve_csv_path = "");

std::string html_escape(const std::string& text);

}  // namespace essaylens
