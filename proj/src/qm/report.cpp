#include "qm/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace qm {

namespace {

std::string fmt_pct(double unit_value) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", unit_value * 100.0);
    return buf;
}

std::string fmt_g(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write report file: " + path.string());
    return out;
}

struct block_key {
    condition_kind condition;
    std::string sub_condition;
    int variant;
    std::string target_id;
    bool operator<(const block_key& o) const {
        return std::tie(condition, sub_condition, variant, target_id) <
               std::tie(o.condition, o.sub_condition, o.variant, o.target_id);
    }
};

}  // namespace

std::vector<condition_block> assemble_blocks(const answer_matrix& matrix,
                                             const run_manifest& manifest,
                                             const result_set& results) {
    if (!results.complete()) throw std::runtime_error("no resolved results: the run is incomplete");
    if (results.masses.size() != manifest.entries.size()) {
        throw std::runtime_error("result set does not match the manifest");
    }

    // gather raw masses per block, keeping first-appearance order of blocks
    std::map<block_key, size_t> block_of;
    std::vector<condition_block> blocks;
    std::vector<std::vector<std::pair<std::string, yes_no_mass>>> raw(0);

    for (size_t i = 0; i < manifest.entries.size(); ++i) {
        const plan_entry& e = manifest.entries[i];
        block_key key{e.condition, e.sub_condition, e.variant, e.target_id};
        auto it = block_of.find(key);
        if (it == block_of.end()) {
            it = block_of.emplace(key, blocks.size()).first;
            blocks.push_back({e.condition, e.sub_condition, e.variant, e.target_id, {}, {}});
            raw.emplace_back();
        }
        raw[it->second].emplace_back(e.respondent_id, *results.masses[i]);
    }

    // respondent scope for broadcasting respondent-independent prompts
    auto golds_for = [&](const std::string& target_id, bool subsample_only) {
        std::vector<std::pair<std::string, int>> out;
        auto qi = matrix.question_index(target_id);
        if (!qi) throw std::runtime_error("unknown target '" + target_id + "' in manifest");
        auto in_subsample = [&](size_t r) {
            return std::binary_search(manifest.paraphrase_subsample.begin(),
                                      manifest.paraphrase_subsample.end(), r);
        };
        for (size_t r = 0; r < matrix.respondents().size(); ++r) {
            if (subsample_only && !in_subsample(r)) continue;
            answer a = matrix.cell(r, *qi);
            if (a == answer::missing) continue;
            out.emplace_back(matrix.respondents()[r].id, a == answer::yes ? 1 : 0);
        }
        return out;
    };

    for (size_t b = 0; b < blocks.size(); ++b) {
        condition_block& blk = blocks[b];
        bool broadcast = blk.condition == condition_kind::zero_shot ||
                         (blk.condition == condition_kind::paraphrase_study &&
                          blk.sub_condition == "zero_shot");
        if (broadcast) {
            if (raw[b].size() != 1) {
                throw std::runtime_error("respondent-independent block has " +
                                         std::to_string(raw[b].size()) + " masses");
            }
            bool subsample_only = blk.condition == condition_kind::paraphrase_study &&
                                  !manifest.paraphrase_subsample.empty();
            for (const auto& [rid, gold] : golds_for(blk.target_id, subsample_only)) {
                blk.preds.push_back(predict(raw[b][0].second, rid, blk.target_id));
                blk.gold.push_back(gold);
            }
        } else {
            for (const auto& [rid, mass] : raw[b]) {
                answer a = matrix.cell(rid, blk.target_id);
                if (a == answer::missing) continue;  // subsampled respondent without a gold answer
                blk.preds.push_back(predict(mass, rid, blk.target_id));
                blk.gold.push_back(a == answer::yes ? 1 : 0);
            }
        }
    }
    return blocks;
}

namespace {

struct condition_report {
    condition_kind condition;
    std::string sub_condition;
    std::vector<question_metrics> per_target;               // variant 0 only
    std::vector<per_respondent_prediction> all_preds;       // variant 0, pooled over targets
    std::map<int, std::vector<question_metrics>> variants;  // ablations: variant -> rows
};

std::string condition_label(condition_kind c, const std::string& sub) {
    std::string s = to_string(c);
    if (!sub.empty()) s += ":" + sub;
    return s;
}

}  // namespace

void emit_reports(const run_config& cfg, const answer_matrix& matrix, const run_manifest& manifest,
                  const result_set& results, const std::filesystem::path& out_dir,
                  const report_options& opts) {
    std::vector<condition_block> blocks = assemble_blocks(matrix, manifest, results);
    std::filesystem::create_directories(out_dir);

    // target order = first appearance in the manifest
    std::vector<std::string> target_order;
    for (const auto& e : manifest.entries) {
        if (std::find(target_order.begin(), target_order.end(), e.target_id) == target_order.end()) {
            target_order.push_back(e.target_id);
        }
    }

    // ------------------------------------------------------------------
    // per-condition metric rows
    std::vector<condition_report> reports;
    auto report_for = [&](condition_kind c, const std::string& sub) -> condition_report& {
        for (auto& r : reports) {
            if (r.condition == c && r.sub_condition == sub) return r;
        }
        reports.push_back({c, sub, {}, {}, {}});
        return reports.back();
    };

    for (const auto& blk : blocks) {
        if (blk.preds.empty()) continue;
        if (blk.condition == condition_kind::paraphrase_study) continue;  // handled as variability
        condition_report& rep = report_for(blk.condition, blk.sub_condition);
        question_metrics qmets = analyze_question(blk.target_id, blk.preds, blk.gold);
        if (blk.variant == 0) {
            rep.per_target.push_back(qmets);
            rep.all_preds.insert(rep.all_preds.end(), blk.preds.begin(), blk.preds.end());
        }
        if (blk.condition == condition_kind::permutation_ablation ||
            blk.condition == condition_kind::length_ablation) {
            rep.variants[blk.variant].push_back(qmets);
        }
    }

    // variability: per (mode, target) bias per paraphrase index
    struct variability_row {
        std::string mode;
        std::string target_id;
        size_t k = 0;
        double value = 0.0;
        double centered = 0.0;
        std::vector<double> biases;
    };
    std::vector<variability_row> variability;
    {
        std::map<std::pair<std::string, std::string>, std::map<int, double>> bias_by_mode_target;
        for (const auto& blk : blocks) {
            if (blk.condition != condition_kind::paraphrase_study || blk.preds.empty()) continue;
            bias_score_result b = bias_score(blk.preds, blk.gold);
            bias_by_mode_target[{blk.sub_condition, blk.target_id}][blk.variant] = b.bias;
        }
        for (const auto& [key, by_variant] : bias_by_mode_target) {
            variability_row row;
            row.mode = key.first;
            row.target_id = key.second;
            for (const auto& [variant, b] : by_variant) row.biases.push_back(b);
            row.k = row.biases.size();
            row.value = std_bias(row.biases);
            row.centered = std_bias_centered(row.biases);
            variability.push_back(std::move(row));
        }
        std::sort(variability.begin(), variability.end(), [&](const auto& a, const auto& b) {
            if (a.mode != b.mode) return a.mode < b.mode;
            auto pa = std::find(target_order.begin(), target_order.end(), a.target_id);
            auto pb = std::find(target_order.begin(), target_order.end(), b.target_id);
            return pa < pb;
        });
    }

    // main condition: first present with per-respondent predictions
    const condition_report* main_rep = nullptr;
    for (condition_kind want :
         {condition_kind::qm, condition_kind::random_context, condition_kind::zero_shot}) {
        for (const auto& r : reports) {
            if (r.condition == want && !r.per_target.empty()) {
                main_rep = &r;
                break;
            }
        }
        if (main_rep) break;
    }

    // ------------------------------------------------------------------
    // metrics.csv (frozen schema; one row per target of the main condition)
    {
        auto out = open_out(out_dir / "metrics.csv");
        out << "target_id,n,pa,pa_se,bias,bias_se,mean_p_yes,sd_p_yes\n";
        if (main_rep) {
            for (const auto& qmets : main_rep->per_target) {
                out << qmets.target_id << ',' << qmets.n << ',' << fmt_pct(qmets.pa) << ','
                    << fmt_pct(qmets.pa_se) << ',' << fmt_pct(qmets.bias) << ','
                    << fmt_pct(qmets.bias_se) << ',' << fmt_pct(qmets.mean_p_yes) << ','
                    << fmt_pct(qmets.sd_p_yes) << '\n';
            }
        }
    }

    // ------------------------------------------------------------------
    // summary.csv (response distribution + cross-question averages)
    {
        auto out = open_out(out_dir / "summary.csv");
        out << "condition,predictions,mean_p_yes,sd_p_yes,yes,no,undefined,avg_pa,avg_pa_se,"
               "avg_abs_bias,avg_abs_bias_se\n";
        for (const auto& rep : reports) {
            if (rep.per_target.empty()) continue;
            response_summary_result rs = response_summary(rep.all_preds);
            metric_average apa = average_pa(rep.per_target);
            metric_average abias = average_abs_bias(rep.per_target);
            out << condition_label(rep.condition, rep.sub_condition) << ',' << rs.total() << ','
                << fmt_pct(rs.mean_p_yes) << ',' << fmt_pct(rs.sd_p_yes) << ',' << rs.yes_count
                << ',' << rs.no_count << ',' << rs.undefined_count << ',' << fmt_pct(apa.value)
                << ',' << fmt_pct(apa.se) << ',' << fmt_pct(abias.value) << ',' << fmt_pct(abias.se)
                << '\n';
        }
    }

    // ------------------------------------------------------------------
    // variability.csv
    {
        auto out = open_out(out_dir / "variability.csv");
        out << "condition,target_id,k,std_bias";
        if (opts.centered) out << ",std_bias_centered";
        out << '\n';
        for (const auto& row : variability) {
            out << row.mode << ',' << row.target_id << ',' << row.k << ',' << fmt_pct(row.value);
            if (opts.centered) out << ',' << fmt_pct(row.centered);
            out << '\n';
        }
    }

    // ------------------------------------------------------------------
    // correlation.csv (within-run scope: (|bias|, PA) pairs across targets)
    {
        auto out = open_out(out_dir / "correlation.csv");
        out << "scope,n,r,df,t,p\n";
        if (main_rep && main_rep->per_target.size() >= 3) {
            std::vector<double> ab, pa;
            for (const auto& qmets : main_rep->per_target) {
                ab.push_back(std::fabs(qmets.bias));
                pa.push_back(qmets.pa);
            }
            bool degenerate = false;
            correlation_result cr;
            try {
                cr = correlate_abs_bias_pa(ab, pa, "run");
            } catch (const std::invalid_argument&) {
                degenerate = true;
            }
            if (!degenerate) {
                out << cr.scope << ',' << ab.size() << ',' << fmt_g(cr.r) << ',' << cr.df << ','
                    << fmt_g(cr.t) << ',' << fmt_g(cr.p_value) << '\n';
            }
        }
    }

    // ------------------------------------------------------------------
    // axis.json
    {
        bool all_annotated = true;
        std::vector<axis_score> axis;
        if (main_rep) {
            for (const auto& qmets : main_rep->per_target) {
                const question* q = matrix.find_question(qmets.target_id);
                if (!q || !q->leaning) {
                    all_annotated = false;
                    if (opts.axis_requested) {
                        throw std::runtime_error("axis report requested but question '" +
                                                 qmets.target_id + "' has no leaning annotation");
                    }
                    break;
                }
                axis.push_back(political_axis(*q, qmets.bias, qmets.bias_se));
            }
        }
        if (main_rep && all_annotated) {
            nlohmann::json arr = nlohmann::json::array();
            for (size_t i = 0; i < axis.size(); ++i) {
                const question* q = matrix.find_question(axis[i].target_id);
                arr.push_back({{"target_id", axis[i].target_id},
                               {"leaning", to_string(*q->leaning)},
                               {"score", axis[i].score},
                               {"se", axis[i].se}});
            }
            auto out = open_out(out_dir / "axis.json");
            out << arr.dump(2) << '\n';
        } else if (opts.axis_requested && !main_rep) {
            throw std::runtime_error("axis report requested but the run has no per-respondent condition");
        }
    }

    // ------------------------------------------------------------------
    // token_distributions.json (mean yes/no/other mass per condition+target)
    {
        nlohmann::json arr = nlohmann::json::array();
        std::set<std::pair<std::string, std::string>> seen;
        for (const auto& blk : blocks) {
            if (blk.variant != 0 || blk.preds.empty()) continue;
            std::string label = condition_label(blk.condition, blk.sub_condition);
            if (!seen.insert({label, blk.target_id}).second) continue;
            double yes = 0.0, no = 0.0;
            for (const auto& p : blk.preds) {
                yes += p.p_yes_raw;
                no += p.p_no_raw;
            }
            double n = static_cast<double>(blk.preds.size());
            arr.push_back({{"condition", label},
                           {"target_id", blk.target_id},
                           {"n", blk.preds.size()},
                           {"yes_mass", yes / n},
                           {"no_mass", no / n},
                           {"other_mass", std::max(0.0, 1.0 - yes / n - no / n)}});
        }
        auto out = open_out(out_dir / "token_distributions.json");
        out << arr.dump(2) << '\n';
    }

    // ------------------------------------------------------------------
    // metrics_full.json (machine precision, unit scale)
    {
        nlohmann::json j;
        j["schema"] = "qm-metrics-v1";
        j["run_id"] = manifest.run_id;
        j["backend_id"] = manifest.backend_id;
        nlohmann::json conds = nlohmann::json::object();
        for (const auto& rep : reports) {
            if (rep.per_target.empty()) continue;
            nlohmann::json per_target = nlohmann::json::object();
            for (const auto& qmets : rep.per_target) {
                per_target[qmets.target_id] = {
                    {"n", qmets.n},         {"n_bias", qmets.n_bias}, {"pa", qmets.pa},
                    {"pa_se", qmets.pa_se}, {"bias", qmets.bias},     {"bias_se", qmets.bias_se},
                    {"mean_p_yes", qmets.mean_p_yes}, {"sd_p_yes", qmets.sd_p_yes}};
            }
            response_summary_result rs = response_summary(rep.all_preds);
            metric_average apa = average_pa(rep.per_target);
            metric_average abias = average_abs_bias(rep.per_target);
            conds[condition_label(rep.condition, rep.sub_condition)] = {
                {"per_target", per_target},
                {"summary",
                 {{"predictions", rs.total()},
                  {"mean_p_yes", rs.mean_p_yes},
                  {"sd_p_yes", rs.sd_p_yes},
                  {"yes", rs.yes_count},
                  {"no", rs.no_count},
                  {"undefined", rs.undefined_count},
                  {"avg_pa", apa.value},
                  {"avg_pa_se", apa.se},
                  {"avg_abs_bias", abias.value},
                  {"avg_abs_bias_se", abias.se}}}};
        }
        j["conditions"] = conds;

        nlohmann::json ablations = nlohmann::json::object();
        for (const auto& rep : reports) {
            if (rep.variants.empty()) continue;
            nlohmann::json rows = nlohmann::json::array();
            auto specs_it = manifest.variant_specs.find(rep.condition);
            for (const auto& [variant, qrows] : rep.variants) {
                nlohmann::json per_target = nlohmann::json::object();
                for (const auto& qmets : qrows) {
                    per_target[qmets.target_id] = {{"bias", qmets.bias},
                                                   {"bias_se", qmets.bias_se},
                                                   {"pa", qmets.pa},
                                                   {"pa_se", qmets.pa_se}};
                }
                nlohmann::json row{{"variant", variant}, {"per_target", per_target}};
                if (specs_it != manifest.variant_specs.end() &&
                    static_cast<size_t>(variant) < specs_it->second.size()) {
                    const context_spec& spec = specs_it->second[static_cast<size_t>(variant)];
                    row["keep_last"] = spec.keep_last_flag;
                    row["context_size"] = spec.included.size();
                    if (spec.seed) row["seed"] = *spec.seed;
                }
                rows.push_back(std::move(row));
            }
            ablations[to_string(rep.condition)] = std::move(rows);
        }
        if (!ablations.empty()) j["ablations"] = ablations;

        if (!variability.empty()) {
            nlohmann::json v = nlohmann::json::object();
            for (const auto& row : variability) {
                v[row.mode][row.target_id] = {{"k", row.k},
                                              {"std_bias", row.value},
                                              {"std_bias_centered", row.centered},
                                              {"biases", row.biases}};
            }
            j["variability"] = v;
        }

        auto out = open_out(out_dir / "metrics_full.json");
        out << j.dump(2) << '\n';
    }

    // ------------------------------------------------------------------
    // report.md
    {
        auto out = open_out(out_dir / "report.md");
        out << "# Run report: " << manifest.run_id << "\n\n";
        out << "- backend: `" << manifest.backend_id << "`\n";
        out << "- corpus: " << matrix.respondents().size() << " respondents, "
            << matrix.questions().size() << " questions ("
            << matrix.issue_questions().size() << " in-context, "
            << matrix.attitude_questions().size() << " targets)\n";
        out << "- entries: " << manifest.entries.size() << "\n\n";
        out << "All percentages are value*100 rounded to two decimals; machine-precision values "
               "are in `metrics_full.json`.\n\n";

        for (const auto& rep : reports) {
            if (rep.per_target.empty()) continue;
            out << "## Condition `" << condition_label(rep.condition, rep.sub_condition) << "`\n\n";
            out << "| target | n | PA | PA SE | bias | bias SE | mean p_yes | SD p_yes |\n";
            out << "|---|---|---|---|---|---|---|---|\n";
            for (const auto& qmets : rep.per_target) {
                out << "| " << qmets.target_id << " | " << qmets.n << " | " << fmt_pct(qmets.pa)
                    << " | " << fmt_pct(qmets.pa_se) << " | " << fmt_pct(qmets.bias) << " | "
                    << fmt_pct(qmets.bias_se) << " | " << fmt_pct(qmets.mean_p_yes) << " | "
                    << fmt_pct(qmets.sd_p_yes) << " |\n";
            }
            response_summary_result rs = response_summary(rep.all_preds);
            metric_average apa = average_pa(rep.per_target);
            metric_average abias = average_abs_bias(rep.per_target);
            out << "\naverages: PA " << fmt_pct(apa.value) << " ± " << fmt_pct(apa.se)
                << ", |bias| " << fmt_pct(abias.value) << " ± " << fmt_pct(abias.se)
                << "; yes:no:undefined = " << rs.yes_count << ":" << rs.no_count << ":"
                << rs.undefined_count << "\n\n";
        }

        if (!variability.empty()) {
            out << "## Bias variability across paraphrases\n\n";
            out << "| condition | target | K | std_bias |";
            if (opts.centered) out << " centered |";
            out << "\n|---|---|---|---|";
            if (opts.centered) out << "---|";
            out << "\n";
            for (const auto& row : variability) {
                out << "| " << row.mode << " | " << row.target_id << " | " << row.k << " | "
                    << fmt_pct(row.value) << " |";
                if (opts.centered) out << ' ' << fmt_pct(row.centered) << " |";
                out << "\n";
            }
            out << "\n";
        }

        for (const auto& rep : reports) {
            if (rep.variants.empty()) continue;
            out << "## Ablation `" << to_string(rep.condition) << "`\n\n";
            out << "| variant | keep_last | size | target | bias | bias SE |\n";
            out << "|---|---|---|---|---|---|\n";
            auto specs_it = manifest.variant_specs.find(rep.condition);
            for (const auto& [variant, qrows] : rep.variants) {
                std::string keep = "-";
                std::string size = "-";
                if (specs_it != manifest.variant_specs.end() &&
                    static_cast<size_t>(variant) < specs_it->second.size()) {
                    const context_spec& spec = specs_it->second[static_cast<size_t>(variant)];
                    keep = spec.keep_last_flag ? "yes" : "no";
                    size = std::to_string(spec.included.size());
                }
                for (const auto& qmets : qrows) {
                    out << "| " << variant << " | " << keep << " | " << size << " | "
                        << qmets.target_id << " | " << fmt_pct(qmets.bias) << " | "
                        << fmt_pct(qmets.bias_se) << " |\n";
                }
            }
            out << "\n";
        }
    }

    (void)cfg;
}

// ---------------------------------------------------------------------------
// cross-run correlation

correlate_inputs load_correlate_inputs(const std::vector<std::filesystem::path>& sources) {
    correlate_inputs inputs;
    for (const auto& src : sources) {
        std::filesystem::path path = src;
        if (std::filesystem::is_directory(path)) {
            if (std::filesystem::exists(path / "reports" / "metrics_full.json")) {
                path = path / "reports" / "metrics_full.json";
            } else {
                path = path / "metrics_full.json";
            }
        }
        std::ifstream in(path);
        if (!in) throw std::runtime_error("cannot open metrics source: " + path.string());
        nlohmann::json j;
        in >> j;

        const nlohmann::json* per_target = nullptr;
        if (j.contains("conditions")) {
            for (const char* want : {"qm", "random_context", "zero_shot"}) {
                if (j["conditions"].contains(want)) {
                    per_target = &j["conditions"][want]["per_target"];
                    break;
                }
            }
        }
        if (!per_target) {
            throw std::runtime_error("metrics source has no usable condition: " + path.string());
        }
        std::map<std::string, std::pair<double, double>> row;
        for (auto it = per_target->begin(); it != per_target->end(); ++it) {
            row[it.key()] = {std::fabs(it.value().at("bias").get<double>()),
                             it.value().at("pa").get<double>()};
        }
        inputs.runs.push_back(std::move(row));
        inputs.labels.push_back(j.value("run_id", path.string()));
    }
    return inputs;
}

std::vector<correlation_result> correlate_runs(const correlate_inputs& inputs) {
    std::vector<correlation_result> out;

    std::vector<double> ab, pa;
    std::set<std::string> targets;
    for (const auto& run : inputs.runs) {
        for (const auto& [target, v] : run) {
            ab.push_back(v.first);
            pa.push_back(v.second);
            targets.insert(target);
        }
    }
    if (ab.size() < 3) throw std::runtime_error("correlate: need at least 3 (model, question) pairs");
    out.push_back(correlate_abs_bias_pa(ab, pa, "pooled"));

    for (const auto& target : targets) {
        std::vector<double> tab, tpa;
        for (const auto& run : inputs.runs) {
            auto it = run.find(target);
            if (it == run.end()) continue;
            tab.push_back(it->second.first);
            tpa.push_back(it->second.second);
        }
        if (tab.size() < 3) continue;
        try {
            out.push_back(correlate_abs_bias_pa(tab, tpa, "question:" + target));
        } catch (const std::invalid_argument&) {
            // degenerate per-question series are skipped, the pooled row remains
        }
    }
    return out;
}

void write_correlation_csv(const std::vector<correlation_result>& rows,
                           const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "scope,n,r,df,t,p\n";
    for (const auto& cr : rows) {
        out << cr.scope << ',' << cr.df + 2 << ',' << fmt_g(cr.r) << ',' << cr.df << ','
            << fmt_g(cr.t) << ',' << fmt_g(cr.p_value) << '\n';
    }
}

}  // namespace qm
