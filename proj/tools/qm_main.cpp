#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

#include "qm/corpus.hpp"
#include "qm/orchestrator.hpp"
#include "qm/report.hpp"
#include "qm/rng.hpp"
#include "qm/toml.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int k_exit_ok = 0;
constexpr int k_exit_other = 1;
constexpr int k_exit_config = 2;
constexpr int k_exit_incomplete = 3;

struct common_overrides {
    std::string backend_kind;
    std::string cache_dir;
    int parallelism = 0;
    uint64_t seed = 0;
    bool seed_set = false;
};

qm::run_config load_config(const std::string& path, const common_overrides& ov) {
    qm::run_config cfg = qm::load_run_config(path);
    if (!ov.backend_kind.empty()) {
        if (ov.backend_kind == "synthetic") {
            cfg.backend = qm::backend_kind::synthetic;
        } else if (ov.backend_kind == "openai_chat") {
            cfg.backend = qm::backend_kind::openai_chat;
        } else if (ov.backend_kind == "openai_completions") {
            cfg.backend = qm::backend_kind::openai_completions;
        } else if (ov.backend_kind == "replay") {
            cfg.backend = qm::backend_kind::replay;
        } else {
            throw qm::config_error("unknown --backend kind '" + ov.backend_kind + "'");
        }
    }
    if (!ov.cache_dir.empty()) cfg.cache_dir = ov.cache_dir;
    if (ov.parallelism > 0) cfg.parallelism = ov.parallelism;
    if (ov.seed_set) {
        for (auto& [cond, seed] : cfg.seeds) {
            seed = qm::derive_seed(ov.seed, "cli-seed", qm::to_string(cond));
        }
    }
    return cfg;
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string manifest_file_content(const qm::run_manifest& manifest, const qm::run_config& cfg) {
    std::ostringstream ss;
    ss << manifest.header_json(cfg).dump() << '\n';
    for (size_t i = 0; i < manifest.entries.size(); ++i) ss << manifest.entry_line(i) << '\n';
    return ss.str();
}

int cmd_validate_data(const std::string& matrix_path, const std::string& questions_path) {
    qm::ingest_stats stats;
    qm::answer_matrix matrix = qm::ingest_corpus(matrix_path, questions_path, &stats);
    std::cout << "respondents: " << matrix.respondents().size() << " (rows read: " << stats.rows_total
              << ", not elected: " << stats.dropped_not_elected
              << ", without answers: " << stats.dropped_no_answers << ")\n";
    std::cout << "questions: " << matrix.questions().size() << " ("
              << matrix.issue_questions().size() << " in-context, "
              << matrix.attitude_questions().size() << " attitude)\n";
    std::cout << "missing cells: " << matrix.missing_cell_count() << " (neutral: " << stats.neutral_cells
              << ", absent: " << stats.absent_cells << ")\n";
    for (const qm::question* q : matrix.attitude_questions()) {
        auto ym = qm::human_yes_mean(matrix, *q);
        auto maj = qm::majority_baseline(matrix, *q);
        std::cout << "  " << q->id << ": n=" << ym.n << " yes-mean=" << ym.mean
                  << " majority=" << maj.accuracy << (maj.tie ? " (tie)" : "") << "\n";
    }
    std::cout << "ok\n";
    return k_exit_ok;
}

int cmd_plan(const qm::run_config& cfg, const std::string& dump_path, size_t dump_limit) {
    qm::answer_matrix matrix = qm::ingest_corpus(cfg.matrix_path.string(), cfg.questions_path.string());
    qm::run_manifest manifest = qm::plan(cfg, matrix);

    std::map<std::string, size_t> per_condition;
    std::map<std::string, size_t> per_target_qm;
    for (const auto& e : manifest.entries) {
        ++per_condition[qm::to_string(e.condition)];
        if (e.condition == qm::condition_kind::qm) ++per_target_qm[e.target_id];
    }
    std::cout << manifest.entries.size() << " entries\n";
    for (const auto& [cond, n] : per_condition) std::cout << "  " << cond << ": " << n << "\n";
    if (!per_target_qm.empty()) {
        std::cout << "qm entries per target (respondents with gold answers):\n";
        for (const auto& [target, n] : per_target_qm) std::cout << "  " << target << ": " << n << "\n";
    }
    if (!manifest.paraphrase_subsample.empty()) {
        size_t para_entries = per_condition.count("paraphrase_study")
                                  ? per_condition.at("paraphrase_study")
                                  : 0;
        std::cout << "paraphrase subsample: " << manifest.paraphrase_subsample.size()
                  << " respondents (floor of " << matrix.respondents().size() << "/"
                  << cfg.subsample_factor << "); study entries planned: " << para_entries << "\n";
    }

    if (!dump_path.empty()) {
        nlohmann::json arr = nlohmann::json::array();
        size_t n = manifest.entries.size();
        if (dump_limit > 0) n = std::min(n, dump_limit);
        for (size_t i = 0; i < n; ++i) {
            const auto& e = manifest.entries[i];
            const auto& p = manifest.prompts[i];
            nlohmann::json turns = nlohmann::json::array();
            for (const auto& t : p.turns) {
                turns.push_back({{"role", t.role == qm::turn_role::user ? "user" : "assistant"},
                                 {"text", t.text}});
            }
            nlohmann::json j{{"index", i},
                             {"condition", qm::to_string(e.condition)},
                             {"variant", e.variant},
                             {"respondent", e.respondent_id},
                             {"target", e.target_id},
                             {"hash", e.canonical_hash},
                             {"turns", turns}};
            if (!e.sub_condition.empty()) j["mode"] = e.sub_condition;
            if (p.mode == qm::render_mode::raw_template) {
                j["raw"] = qm::render_raw(p, *p.template_id);
            }
            arr.push_back(std::move(j));
        }
        std::ofstream out(dump_path, std::ios::binary | std::ios::trunc);
        out << arr.dump(2) << '\n';
        std::cout << "wrote " << n << " prompts to " << dump_path << "\n";
    }
    return k_exit_ok;
}

int cmd_run(const qm::run_config& cfg) {
    qm::answer_matrix matrix = qm::ingest_corpus(cfg.matrix_path.string(), cfg.questions_path.string());
    qm::run_manifest manifest = qm::plan(cfg, matrix);

    fs::create_directories(cfg.output_dir);
    fs::path manifest_path = cfg.output_dir / "manifest.jsonl";
    std::string content = manifest_file_content(manifest, cfg);
    if (fs::exists(manifest_path)) {
        if (read_file(manifest_path) != content) {
            throw qm::config_error("existing manifest in " + cfg.output_dir.string() +
                                   " was planned from a different config; use a fresh output_dir");
        }
    } else {
        qm::write_manifest(manifest, cfg, cfg.output_dir);
    }

    auto be = qm::make_backend(cfg, matrix);
    qm::gateway gw(be, cfg.cache_dir);
    qm::execute_options opts;
    opts.parallelism = cfg.parallelism;
    qm::result_set rs = qm::execute(manifest, gw, cfg.output_dir, opts);

    std::cout << "resolved " << (manifest.entries.size() - rs.unresolved.size()) << "/"
              << manifest.entries.size() << " entries (cache hits: " << gw.cache_hits()
              << ", backend queries: " << gw.backend_queries() << ")\n";
    if (!rs.complete()) {
        std::cout << "run incomplete; remainder.json lists " << rs.unresolved.size()
                  << " unresolved entries. Re-run to resume.\n";
        return k_exit_incomplete;
    }
    std::cout << "results written to " << (cfg.output_dir / "results.jsonl").string() << "\n";
    return k_exit_ok;
}

int cmd_report(const qm::run_config& cfg, bool centered, bool axis) {
    qm::answer_matrix matrix = qm::ingest_corpus(cfg.matrix_path.string(), cfg.questions_path.string());
    qm::run_manifest manifest = qm::plan(cfg, matrix);
    qm::result_set rs = qm::load_results(manifest, cfg.output_dir);
    if (!rs.complete()) {
        std::cerr << "error: no resolved results in " << cfg.output_dir.string()
                  << " (run `qm run` first)\n";
        return k_exit_incomplete;
    }
    qm::report_options opts;
    opts.centered = centered;
    opts.axis_requested = axis;
    qm::emit_reports(cfg, matrix, manifest, rs, cfg.output_dir / "reports", opts);
    std::cout << "reports written to " << (cfg.output_dir / "reports").string() << "\n";
    return k_exit_ok;
}

int cmd_paraphrase_generate(const qm::run_config& cfg, const std::string& target_id, int count,
                            std::string out_path) {
    qm::answer_matrix matrix = qm::ingest_corpus(cfg.matrix_path.string(), cfg.questions_path.string());
    const qm::question* target = matrix.find_question(target_id);
    if (!target) throw qm::config_error("target '" + target_id + "' not found");

    qm::query_cache cache(cfg.cache_dir);
    std::shared_ptr<qm::backend> be;
    qm::http_backend* http = nullptr;
    if (cfg.backend == qm::backend_kind::openai_chat) {
        be = qm::make_backend(cfg, matrix);
        http = dynamic_cast<qm::http_backend*>(be.get());
    } else if (cfg.backend != qm::backend_kind::replay) {
        throw qm::config_error("paraphrase generation needs an openai_chat backend (or replay with a warm cache)");
    }

    qm::paraphrase_generation_config pcfg;
    pcfg.count = count;
    pcfg.seed = cfg.seed_for(qm::condition_kind::paraphrase_study);
    auto paraphrases = qm::generate_paraphrases(target->text, http, cache, pcfg);

    if (out_path.empty()) {
        fs::path dir = cfg.paraphrase_dir.empty() ? fs::path("paraphrases") : cfg.paraphrase_dir;
        fs::create_directories(dir);
        out_path = (dir / (target_id + ".txt")).string();
    } else if (fs::path(out_path).has_parent_path()) {
        fs::create_directories(fs::path(out_path).parent_path());
    }
    std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + out_path);
    for (const auto& p : paraphrases) out << p << '\n';
    std::cout << "wrote " << paraphrases.size() << " paraphrases to " << out_path << "\n";
    return k_exit_ok;
}

int cmd_paraphrase_validate(const std::string& file, int expected_count) {
    auto lines = qm::load_paraphrase_file(file);
    std::set<std::string> distinct(lines.begin(), lines.end());
    if (distinct.size() != lines.size()) {
        std::cerr << "error: " << lines.size() - distinct.size() << " duplicate paraphrases in "
                  << file << "\n";
        return k_exit_other;
    }
    if (expected_count > 0 && lines.size() != static_cast<size_t>(expected_count)) {
        std::cerr << "error: expected " << expected_count << " paraphrases, found " << lines.size()
                  << " in " << file << "\n";
        return k_exit_other;
    }
    std::cout << file << ": " << lines.size() << " paraphrases, all distinct\n";
    return k_exit_ok;
}

int cmd_correlate(const std::vector<std::string>& sources, const std::string& out_path) {
    std::vector<fs::path> paths(sources.begin(), sources.end());
    auto inputs = qm::load_correlate_inputs(paths);
    auto rows = qm::correlate_runs(inputs);
    qm::write_correlation_csv(rows, out_path);
    for (const auto& r : rows) {
        std::cout << r.scope << ": r=" << r.r << " t[" << r.df << "]=" << r.t << " p=" << r.p_value
                  << "\n";
    }
    std::cout << "wrote " << out_path << "\n";
    return k_exit_ok;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Questionnaire-conditioned bias probing for next-token language models"};
    app.require_subcommand(1);

    common_overrides ov;
    std::string config_path;

    auto add_config_flags = [&](CLI::App* cmd, bool with_overrides = true) {
        cmd->add_option("--config", config_path, "run configuration (TOML)")->required();
        if (with_overrides) {
            cmd->add_option("--backend", ov.backend_kind,
                            "override backend kind (synthetic|openai_chat|openai_completions|replay)");
            cmd->add_option("--cache-dir", ov.cache_dir, "override cache directory");
            cmd->add_option("--parallelism", ov.parallelism, "override query parallelism");
            cmd->add_option("--seed", ov.seed, "derive all condition seeds from this value")
                ->each([&](const std::string&) { ov.seed_set = true; });
        }
    };

    // validate-data
    std::string matrix_path, questions_path;
    auto* validate = app.add_subcommand("validate-data", "ingest and validate a survey corpus");
    validate->add_option("--matrix", matrix_path, "wide CSV answer matrix")->required();
    validate->add_option("--questions", questions_path, "question sidecar JSON")->required();

    // plan
    auto* plan_cmd = app.add_subcommand("plan", "dry-run: enumerate the query plan");
    std::string dump_path;
    size_t dump_limit = 0;
    add_config_flags(plan_cmd);
    plan_cmd->add_option("--dump-prompts", dump_path, "write rendered prompts to this JSON file");
    plan_cmd->add_option("--limit", dump_limit, "dump at most this many prompts (0 = all)");

    // run
    auto* run_cmd = app.add_subcommand("run", "execute the plan (resumes if interrupted)");
    add_config_flags(run_cmd);

    // report
    auto* report_cmd = app.add_subcommand("report", "emit metric tables and plot data");
    bool centered = false, axis = false;
    add_config_flags(report_cmd);
    report_cmd->add_flag("--centered", centered, "add the centered-SD variability column");
    report_cmd->add_flag("--axis", axis, "require the political-axis report (fails if leanings are missing)");

    // paraphrase
    auto* para_cmd = app.add_subcommand("paraphrase", "generate or validate paraphrase sets");
    para_cmd->require_subcommand(1);
    auto* para_gen = para_cmd->add_subcommand("generate", "generate a paraphrase file via the chat backend");
    std::string para_target, para_out;
    int para_count = 50;
    add_config_flags(para_gen);
    para_gen->add_option("--target", para_target, "target question id")->required();
    para_gen->add_option("--count", para_count, "paraphrases to sample");
    para_gen->add_option("--out", para_out, "output file (default: <paraphrase dir>/<target>.txt)");
    auto* para_val = para_cmd->add_subcommand("validate", "check an existing paraphrase file");
    std::string para_file;
    int para_expected = 0;
    para_val->add_option("--file", para_file, "paraphrase file")->required();
    para_val->add_option("--count", para_expected, "expected number of paraphrases");

    // correlate
    auto* corr_cmd = app.add_subcommand("correlate", "pool (|bias|, PA) pairs across runs");
    std::vector<std::string> corr_sources;
    std::string corr_out = "correlation.csv";
    corr_cmd->add_option("sources", corr_sources, "run dirs or metrics_full.json files")->required();
    corr_cmd->add_option("--out", corr_out, "output CSV path");

    CLI11_PARSE(app, argc, argv);

    try {
        if (validate->parsed()) return cmd_validate_data(matrix_path, questions_path);
        if (plan_cmd->parsed()) return cmd_plan(load_config(config_path, ov), dump_path, dump_limit);
        if (run_cmd->parsed()) return cmd_run(load_config(config_path, ov));
        if (report_cmd->parsed()) return cmd_report(load_config(config_path, ov), centered, axis);
        if (para_cmd->parsed()) {
            if (para_gen->parsed()) {
                return cmd_paraphrase_generate(load_config(config_path, ov), para_target, para_count,
                                               para_out);
            }
            return cmd_paraphrase_validate(para_file, para_expected);
        }
        if (corr_cmd->parsed()) return cmd_correlate(corr_sources, corr_out);
    } catch (const qm::config_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return k_exit_config;
    } catch (const qm::toml::parse_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return k_exit_config;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return k_exit_other;
    }
    return k_exit_other;
}
