#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qm/corpus.hpp"
#include "qm/metrics.hpp"
#include "qm/orchestrator.hpp"

namespace qm {

struct report_options {
    bool centered = false;        // add the centered-SD comparison column to variability
    bool axis_requested = false;  // fail instead of skipping when leanings are missing
};

// Writes metrics.csv, summary.csv, variability.csv, correlation.csv,
// axis.json, token_distributions.json, metrics_full.json and report.md into
// out_dir. Pure function of its inputs: regeneration is byte-identical.
void emit_reports(const run_config& cfg, const answer_matrix& matrix, const run_manifest& manifest,
                  const result_set& results, const std::filesystem::path& out_dir,
                  const report_options& opts);

// Per-condition per-target predictions assembled from a result set,
// aligned with the gold answers of the respondents they cover.
struct condition_block {
    condition_kind condition;
    std::string sub_condition;  // paraphrase base mode, else empty
    int variant = 0;
    std::string target_id;
    std::vector<per_respondent_prediction> preds;
    std::vector<int> gold;
};

// Exposed for tests and the acceptance suite.
std::vector<condition_block> assemble_blocks(const answer_matrix& matrix,
                                             const run_manifest& manifest,
                                             const result_set& results);

struct correlate_inputs {
    // one entry per model/run: target id -> (|bias|, pa), unit scale
    std::vector<std::map<std::string, std::pair<double, double>>> runs;
    std::vector<std::string> labels;
};

correlate_inputs load_correlate_inputs(const std::vector<std::filesystem::path>& sources);

// Pooled correlation over all (model, question) pairs plus per-question rows
// across models (where at least 3 models cover the question).
std::vector<correlation_result> correlate_runs(const correlate_inputs& inputs);

void write_correlation_csv(const std::vector<correlation_result>& rows,
                           const std::filesystem::path& path);

}  // namespace qm
