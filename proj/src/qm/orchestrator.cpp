#include "qm/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "qm/rng.hpp"
#include "qm/sha256.hpp"
#include "qm/toml.hpp"

namespace qm {

std::string to_string(condition_kind c) {
    switch (c) {
        case condition_kind::qm: return "qm";
        case condition_kind::zero_shot: return "zero_shot";
        case condition_kind::random_context: return "random_context";
        case condition_kind::paraphrase_study: return "paraphrase_study";
        case condition_kind::permutation_ablation: return "permutation_ablation";
        case condition_kind::length_ablation: return "length_ablation";
    }
    throw std::logic_error("bad condition");
}

condition_kind condition_from_string(const std::string& s) {
    if (s == "qm") return condition_kind::qm;
    if (s == "zero_shot") return condition_kind::zero_shot;
    if (s == "random_context") return condition_kind::random_context;
    if (s == "paraphrase_study") return condition_kind::paraphrase_study;
    if (s == "permutation_ablation") return condition_kind::permutation_ablation;
    if (s == "length_ablation") return condition_kind::length_ablation;
    throw config_error("unknown condition '" + s + "'");
}

uint64_t run_config::seed_for(condition_kind c) const {
    auto it = seeds.find(c);
    return it == seeds.end() ? 0 : it->second;
}

namespace {

constexpr condition_kind k_condition_order[] = {
    condition_kind::qm,           condition_kind::zero_shot,
    condition_kind::random_context, condition_kind::paraphrase_study,
    condition_kind::permutation_ablation, condition_kind::length_ablation,
};

bool condition_needs_seed(condition_kind c) {
    return c == condition_kind::random_context || c == condition_kind::paraphrase_study ||
           c == condition_kind::permutation_ablation || c == condition_kind::length_ablation;
}

}  // namespace

run_config load_run_config(const std::filesystem::path& path) {
    toml::document doc;
    try {
        doc = toml::parse_file(path.string());
    } catch (const toml::parse_error& e) {
        throw config_error(e.what());
    }

    run_config cfg;
    try {
        cfg.run_id = doc.require_string("run_id");
        cfg.output_dir = doc.require_string("output_dir");
        cfg.matrix_path = doc.require_string("corpus.matrix");
        cfg.questions_path = doc.require_string("corpus.questions");

        std::string kind = doc.get_string("backend.kind", "synthetic");
        if (kind == "synthetic") {
            cfg.backend = backend_kind::synthetic;
        } else if (kind == "openai_chat") {
            cfg.backend = backend_kind::openai_chat;
        } else if (kind == "openai_completions") {
            cfg.backend = backend_kind::openai_completions;
        } else if (kind == "replay") {
            cfg.backend = backend_kind::replay;
        } else {
            throw config_error("unknown backend kind '" + kind + "'");
        }
        cfg.backend_id = doc.get_string("backend.id", kind);

        cfg.http.id = cfg.backend_id;
        cfg.http.base_url = doc.get_string("backend.base_url", "");
        cfg.http.model = doc.get_string("backend.model", "");
        cfg.http.chat = cfg.backend != backend_kind::openai_completions;
        std::string tmpl = doc.get_string("backend.template", "");
        if (!tmpl.empty()) cfg.http.template_id = tmpl;
        cfg.http.forced_pair = doc.get_bool("backend.forced_pair", false);
        cfg.http.api_key_env = doc.get_string("backend.api_key_env", "QM_API_KEY");
        cfg.http.timeout_ms = static_cast<int>(doc.get_int("backend.timeout_ms", 30000));
        cfg.http.retry_attempts = static_cast<int>(doc.get_int("run.retry_attempts", 3));
        cfg.http.retry_backoff_ms = static_cast<int>(doc.get_int("run.retry_backoff_ms", 250));

        cfg.oracle.fidelity = doc.get_number("backend.fidelity", 1.0);
        cfg.oracle.base_rate = doc.get_number("backend.base_rate", 0.0);
        cfg.oracle.noise = doc.get_number("backend.noise", 0.0);
        cfg.oracle.seed = static_cast<uint64_t>(doc.get_int("backend.oracle_seed", 0));

        auto condition_names = doc.get_string_array("run.conditions");
        if (condition_names.empty()) throw config_error("run.conditions must list at least one condition");
        std::set<condition_kind> enabled;
        for (const auto& name : condition_names) enabled.insert(condition_from_string(name));
        for (condition_kind c : k_condition_order) {
            if (enabled.count(c)) cfg.conditions.push_back(c);
        }

        cfg.targets = doc.get_string_array("run.targets");
        cfg.parallelism = static_cast<int>(doc.get_int("run.parallelism", 1));
        if (cfg.parallelism < 1) throw config_error("run.parallelism must be >= 1");
        std::string cache = doc.get_string("run.cache_dir", "");
        cfg.cache_dir = cache.empty() ? cfg.output_dir / "cache" : std::filesystem::path(cache);

        for (condition_kind c : k_condition_order) {
            std::string key = "seeds." + to_string(c);
            if (doc.has(key)) cfg.seeds[c] = static_cast<uint64_t>(doc.get_int(key, 0));
        }
        for (condition_kind c : cfg.conditions) {
            if (condition_needs_seed(c) && !cfg.seeds.count(c)) {
                throw config_error("condition '" + to_string(c) + "' is enabled but has no seed ([seeds] table)");
            }
        }

        cfg.paraphrase_dir = doc.get_string("paraphrase_study.dir", "");
        cfg.paraphrase_targets = doc.get_string_array("paraphrase_study.targets");
        auto modes = doc.get_string_array("paraphrase_study.modes");
        if (!modes.empty()) {
            cfg.paraphrase_modes.clear();
            for (const auto& m : modes) {
                condition_kind c = condition_from_string(m);
                if (c != condition_kind::qm && c != condition_kind::zero_shot &&
                    c != condition_kind::random_context) {
                    throw config_error("paraphrase_study.modes entries must be qm, zero_shot or random_context");
                }
                cfg.paraphrase_modes.push_back(c);
            }
        }
        cfg.subsample_factor = static_cast<int>(doc.get_int("paraphrase_study.subsample_factor", 10));
        if (cfg.subsample_factor < 1) throw config_error("paraphrase_study.subsample_factor must be >= 1");

        cfg.permutation.count = static_cast<int>(doc.get_int("permutation_ablation.count", 6));
        cfg.permutation.same_last_count = static_cast<int>(doc.get_int("permutation_ablation.same_last", 3));

        auto fractions = doc.get_number_array("length_ablation.fractions");
        if (!fractions.empty()) cfg.truncation.fractions = fractions;
    } catch (const toml::parse_error& e) {
        throw config_error(e.what());
    }
    return cfg;
}

// ---------------------------------------------------------------------------
// planning

namespace {

std::vector<const question*> resolve_targets(const answer_matrix& matrix,
                                             const std::vector<std::string>& requested) {
    std::vector<const question*> out;
    if (requested.empty()) {
        out = matrix.attitude_questions();
    } else {
        for (const auto& id : requested) {
            const question* q = matrix.find_question(id);
            if (!q) throw config_error("target '" + id + "' not found in question sidecar");
            if (q->kind != question_kind::attitude) {
                throw config_error("target '" + id + "' is not an attitude question");
            }
            out.push_back(q);
        }
    }
    if (out.empty()) throw config_error("no targets: corpus has no attitude questions");
    return out;
}

std::vector<size_t> respondents_with_gold(const answer_matrix& matrix, const question& target) {
    std::vector<size_t> out;
    auto qi = matrix.question_index(target.id);
    for (size_t r = 0; r < matrix.respondents().size(); ++r) {
        if (matrix.cell(r, *qi) != answer::missing) out.push_back(r);
    }
    return out;
}

void push_entry(run_manifest& m, condition_kind c, int variant, std::string sub_condition,
                const std::string& respondent_id, const std::string& target_id,
                const context_spec* spec, rendered_prompt prompt) {
    plan_entry e;
    e.condition = c;
    e.variant = variant;
    e.sub_condition = std::move(sub_condition);
    e.respondent_id = respondent_id;
    e.target_id = target_id;
    e.spec_digest = spec ? spec->digest() : "";
    e.canonical_hash = prompt.canonical_hash;
    m.entries.push_back(std::move(e));
    m.prompts.push_back(std::move(prompt));
}

}  // namespace

run_manifest plan(const run_config& cfg, const answer_matrix& matrix) {
    run_manifest m;
    m.run_id = cfg.run_id;
    m.backend_id = cfg.backend_id;

    render_options render;
    if (cfg.backend == backend_kind::openai_completions) {
        render = {render_mode::raw_template, cfg.http.template_id};
    } else if (cfg.backend == backend_kind::replay && cfg.http.template_id) {
        render = {render_mode::raw_template, cfg.http.template_id};
    }
    m.render = render;

    auto targets = resolve_targets(matrix, cfg.targets);
    context_spec base = default_context(matrix);

    for (condition_kind cond : cfg.conditions) {
        switch (cond) {
            case condition_kind::qm: {
                for (const question* t : targets) {
                    for (size_t r : respondents_with_gold(matrix, *t)) {
                        const respondent& resp = matrix.respondents()[r];
                        push_entry(m, cond, 0, "", resp.id, t->id, &base,
                                   build_qm(matrix, resp, *t, base, render));
                    }
                }
                break;
            }
            case condition_kind::zero_shot: {
                for (const question* t : targets) {
                    push_entry(m, cond, 0, "", "", t->id, nullptr, build_zero_shot(*t, render));
                }
                break;
            }
            case condition_kind::random_context: {
                context_spec spec = base;
                spec.answer_source = answer_source_kind::random;
                spec.seed = cfg.seed_for(cond);
                m.variant_specs[cond] = {spec};
                for (const question* t : targets) {
                    for (size_t r : respondents_with_gold(matrix, *t)) {
                        const respondent& resp = matrix.respondents()[r];
                        push_entry(m, cond, 0, "", resp.id, t->id, &spec,
                                   build_qm(matrix, resp, *t, spec, render));
                    }
                }
                break;
            }
            case condition_kind::paraphrase_study: {
                if (cfg.paraphrase_dir.empty()) {
                    throw config_error("paraphrase_study enabled but paraphrase_study.dir is not set");
                }
                size_t n = matrix.respondents().size();
                size_t k = std::max<size_t>(1, n / static_cast<size_t>(cfg.subsample_factor));
                std::mt19937_64 gen(derive_seed(cfg.seed_for(cond), "subsample"));
                std::vector<size_t> sample = sample_without_replacement(n, k, gen);
                std::sort(sample.begin(), sample.end());
                m.paraphrase_subsample = sample;

                auto para_targets = resolve_targets(
                    matrix, cfg.paraphrase_targets.empty() ? cfg.targets : cfg.paraphrase_targets);

                context_spec random_spec = base;
                random_spec.answer_source = answer_source_kind::random;
                random_spec.seed = cfg.seed_for(condition_kind::random_context);

                for (const question* t : para_targets) {
                    auto file = cfg.paraphrase_dir / (t->id + ".txt");
                    std::vector<std::string> paraphrases = load_paraphrase_file(file);
                    for (condition_kind mode : cfg.paraphrase_modes) {
                        if (mode == condition_kind::random_context && !cfg.seeds.count(condition_kind::random_context)) {
                            throw config_error("paraphrase_study mode random_context requires seeds.random_context");
                        }
                        for (size_t pk = 0; pk < paraphrases.size(); ++pk) {
                            if (mode == condition_kind::zero_shot) {
                                rendered_prompt p =
                                    apply_paraphrase(build_zero_shot(*t, render), paraphrases[pk]);
                                push_entry(m, cond, static_cast<int>(pk), to_string(mode), "", t->id,
                                           nullptr, std::move(p));
                                continue;
                            }
                            const context_spec& spec =
                                mode == condition_kind::qm ? base : random_spec;
                            for (size_t r : sample) {
                                const respondent& resp = matrix.respondents()[r];
                                rendered_prompt p = apply_paraphrase(
                                    build_qm(matrix, resp, *t, spec, render), paraphrases[pk]);
                                push_entry(m, cond, static_cast<int>(pk), to_string(mode), resp.id,
                                           t->id, &spec, std::move(p));
                            }
                        }
                    }
                }
                break;
            }
            case condition_kind::permutation_ablation: {
                auto specs = derive_permutation_specs(base, cfg.permutation, cfg.seed_for(cond));
                m.variant_specs[cond] = specs;
                for (size_t si = 0; si < specs.size(); ++si) {
                    for (const question* t : targets) {
                        for (size_t r : respondents_with_gold(matrix, *t)) {
                            const respondent& resp = matrix.respondents()[r];
                            push_entry(m, cond, static_cast<int>(si), "", resp.id, t->id, &specs[si],
                                       build_qm(matrix, resp, *t, specs[si], render));
                        }
                    }
                }
                break;
            }
            case condition_kind::length_ablation: {
                auto specs = derive_truncation_specs(base, cfg.truncation, cfg.seed_for(cond));
                m.variant_specs[cond] = specs;
                for (size_t si = 0; si < specs.size(); ++si) {
                    for (const question* t : targets) {
                        for (size_t r : respondents_with_gold(matrix, *t)) {
                            const respondent& resp = matrix.respondents()[r];
                            push_entry(m, cond, static_cast<int>(si), "", resp.id, t->id, &specs[si],
                                       build_qm(matrix, resp, *t, specs[si], render));
                        }
                    }
                }
                break;
            }
        }
    }
    return m;
}

// ---------------------------------------------------------------------------
// manifest / results persistence

nlohmann::json run_manifest::header_json(const run_config& cfg) const {
    nlohmann::json seeds = nlohmann::json::object();
    for (condition_kind c : cfg.conditions) seeds[to_string(c)] = cfg.seed_for(c);
    nlohmann::json j{
        {"schema", "qm-manifest-v1"},
        {"run_id", run_id},
        {"backend_id", backend_id},
        {"mode", render.mode == render_mode::chat_messages ? "chat_messages" : "raw_template"},
        {"template", render.template_id.value_or("")},
        {"temperature", k_temperature},
        {"top_k", k_top_k},
        {"seeds", seeds},
        {"entries", entries.size()},
    };
    if (!paraphrase_subsample.empty()) j["paraphrase_subsample_size"] = paraphrase_subsample.size();
    return j;
}

std::string run_manifest::entry_line(size_t i) const {
    const plan_entry& e = entries[i];
    nlohmann::json j{{"c", to_string(e.condition)}, {"v", e.variant},       {"r", e.respondent_id},
                     {"t", e.target_id},            {"d", e.spec_digest},   {"h", e.canonical_hash}};
    if (!e.sub_condition.empty()) j["m"] = e.sub_condition;
    return j.dump();
}

std::string manifest_digest(const run_manifest& m) {
    std::string all;
    for (size_t i = 0; i < m.entries.size(); ++i) {
        all += m.entry_line(i);
        all += '\n';
    }
    return sha256_hex(all);
}

void write_manifest(const run_manifest& manifest, const run_config& cfg,
                    const std::filesystem::path& run_dir) {
    std::filesystem::create_directories(run_dir);
    std::ofstream out(run_dir / "manifest.jsonl", std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write manifest in " + run_dir.string());
    out << manifest.header_json(cfg).dump() << '\n';
    for (size_t i = 0; i < manifest.entries.size(); ++i) out << manifest.entry_line(i) << '\n';
}

void write_results(const run_manifest& manifest, const result_set& results,
                   const std::filesystem::path& run_dir) {
    if (!results.complete()) throw std::runtime_error("refusing to write incomplete results");
    std::filesystem::create_directories(run_dir);
    std::ofstream out(run_dir / "results.jsonl", std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write results in " + run_dir.string());
    for (size_t i = 0; i < manifest.entries.size(); ++i) {
        const plan_entry& e = manifest.entries[i];
        nlohmann::json j{{"c", to_string(e.condition)},
                         {"v", e.variant},
                         {"r", e.respondent_id},
                         {"t", e.target_id},
                         {"h", e.canonical_hash},
                         {"p_yes", results.masses[i]->p_yes_raw},
                         {"p_no", results.masses[i]->p_no_raw}};
        if (!e.sub_condition.empty()) j["m"] = e.sub_condition;
        out << j.dump() << '\n';
    }
}

result_set load_results(const run_manifest& manifest, const std::filesystem::path& run_dir) {
    result_set rs;
    rs.masses.assign(manifest.entries.size(), std::nullopt);
    std::ifstream in(run_dir / "results.jsonl");
    if (!in) {
        for (size_t i = 0; i < manifest.entries.size(); ++i) rs.unresolved.push_back(i);
        return rs;
    }
    std::string line;
    size_t i = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (i >= manifest.entries.size()) throw std::runtime_error("results.jsonl has more lines than the manifest");
        nlohmann::json j = nlohmann::json::parse(line);
        if (j.at("h").get<std::string>() != manifest.entries[i].canonical_hash) {
            throw std::runtime_error("results.jsonl line " + std::to_string(i + 1) +
                                     " does not match the manifest entry hash");
        }
        rs.masses[i] = yes_no_mass{j.at("p_yes").get<double>(), j.at("p_no").get<double>()};
        ++i;
    }
    for (size_t k = i; k < manifest.entries.size(); ++k) rs.unresolved.push_back(k);
    return rs;
}

// ---------------------------------------------------------------------------
// execution

namespace {

struct checkpoint {
    std::map<size_t, resolved_entry> done;
    bool has_header = false;
};

checkpoint load_checkpoint(const std::filesystem::path& path, const std::string& digest,
                           size_t entry_count) {
    checkpoint cp;
    std::ifstream in(path);
    if (!in) return cp;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        nlohmann::json j = nlohmann::json::parse(line);
        if (j.contains("schema")) {
            if (j.value("schema", "") != "qm-checkpoint-v1" ||
                j.at("manifest").get<std::string>() != digest) {
                throw std::runtime_error(
                    "checkpoint in run directory belongs to a different manifest; "
                    "remove it or use a fresh output_dir");
            }
            cp.has_header = true;
            continue;
        }
        resolved_entry e;
        e.entry_index = j.at("i").get<size_t>();
        if (e.entry_index >= entry_count) throw std::runtime_error("checkpoint entry out of range");
        e.mass = {j.at("p_yes").get<double>(), j.at("p_no").get<double>()};
        e.retries = j.value("retries", 0);
        cp.done[e.entry_index] = e;
    }
    return cp;
}

}  // namespace

result_set execute(const run_manifest& manifest, gateway& gw,
                   const std::filesystem::path& run_dir, const execute_options& opts) {
    std::filesystem::create_directories(run_dir);
    const std::string digest = manifest_digest(manifest);
    const auto checkpoint_path = run_dir / "checkpoint.jsonl";

    checkpoint cp = load_checkpoint(checkpoint_path, digest, manifest.entries.size());

    result_set rs;
    rs.masses.assign(manifest.entries.size(), std::nullopt);
    for (const auto& [i, e] : cp.done) rs.masses[i] = e.mass;

    std::ofstream ckpt;
    ckpt.open(checkpoint_path, std::ios::binary | std::ios::app);
    if (!ckpt) throw std::runtime_error("cannot open checkpoint in " + run_dir.string());
    if (!cp.has_header) {
        nlohmann::json header{{"schema", "qm-checkpoint-v1"}, {"manifest", digest}};
        ckpt << header.dump() << '\n';
        ckpt.flush();
    }

    std::vector<size_t> todo;
    for (size_t i = 0; i < manifest.entries.size(); ++i) {
        if (!rs.masses[i]) todo.push_back(i);
    }

    std::mutex write_mu;  // single writer for checkpoint appends
    std::atomic<size_t> next{0};
    std::atomic<size_t> resolved_now{0};
    std::atomic<bool> aborted{false};
    std::vector<std::string> errors;

    auto worker = [&]() {
        while (!aborted.load()) {
            if (opts.stop_after && resolved_now.load() >= *opts.stop_after) break;
            size_t slot = next.fetch_add(1);
            if (slot >= todo.size()) break;
            size_t i = todo[slot];
            const plan_entry& e = manifest.entries[i];
            try {
                int retries = 0;
                yes_no_mass mass =
                    gw.resolve(manifest.prompts[i], {e.respondent_id, e.target_id}, &retries);
                nlohmann::json j{{"i", i},
                                 {"p_yes", mass.p_yes_raw},
                                 {"p_no", mass.p_no_raw},
                                 {"retries", retries}};
                {
                    std::lock_guard<std::mutex> lock(write_mu);
                    rs.masses[i] = mass;
                    ckpt << j.dump() << '\n';
                    ckpt.flush();
                    ++resolved_now;
                }
            } catch (const std::exception& ex) {
                std::lock_guard<std::mutex> lock(write_mu);
                errors.push_back("entry " + std::to_string(i) + " (" + e.canonical_hash +
                                 "): " + ex.what());
                aborted.store(true);
            }
        }
    };

    int threads = std::max(1, opts.parallelism);
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(static_cast<size_t>(threads));
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    for (size_t i = 0; i < manifest.entries.size(); ++i) {
        if (!rs.masses[i]) rs.unresolved.push_back(i);
    }

    if (!rs.unresolved.empty()) {
        nlohmann::json remainder{{"manifest", digest},
                                 {"unresolved", rs.unresolved},
                                 {"errors", errors}};
        std::ofstream rem(run_dir / "remainder.json", std::ios::binary | std::ios::trunc);
        rem << remainder.dump(2) << '\n';
    } else {
        std::error_code ec;
        std::filesystem::remove(run_dir / "remainder.json", ec);
        write_results(manifest, rs, run_dir);
    }
    return rs;
}

// ---------------------------------------------------------------------------
// paraphrases

std::vector<std::string> load_paraphrase_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw config_error("paraphrase file not found: " + path.string());
    }
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) {
            line.pop_back();
        }
        size_t b = line.find_first_not_of(" \t");
        if (b == std::string::npos) continue;
        out.push_back(line.substr(b));
    }
    if (out.empty()) throw config_error("paraphrase file is empty: " + path.string());
    return out;
}

std::vector<std::string> generate_paraphrases(const std::string& statement, http_backend* be,
                                              const query_cache& cache,
                                              const paraphrase_generation_config& cfg) {
    const std::string system_prompt =
        "You are a helpful assistant designed to create paraphrases and output them separated "
        "by new lines.";
    const std::string user_prompt =
        "Provide " + std::to_string(cfg.per_call) + " paraphrases for the following statement: " +
        statement + ".";

    std::vector<std::string> collected;
    for (int call = 0; call < cfg.calls; ++call) {
        uint64_t call_seed = derive_seed(cfg.seed, "paraphrase-call", std::to_string(call));
        std::string key = sha256_hex("qm-paragen-v1|" + std::to_string(cfg.temperature) + "|" +
                                     std::to_string(call_seed) + "|" + system_prompt + "|" + user_prompt);
        std::string text;
        if (auto rec = cache.get(key, "paraphrase-gen"); rec && rec->text) {
            text = *rec->text;
        } else {
            if (!be) {
                throw std::runtime_error("paraphrase generation needs a chat backend (cache miss for call " +
                                         std::to_string(call + 1) + ")");
            }
            text = be->chat_text({{"system", system_prompt}, {"user", user_prompt}}, cfg.temperature,
                                 call_seed);
            query_record store;
            store.hash = key;
            store.backend_id = be->id();
            store.text = text;
            store.timestamp = utc_timestamp();
            cache.put(store, "paraphrase-gen");
        }
        std::istringstream ss(text);
        std::string line;
        while (std::getline(ss, line)) {
            while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) {
                line.pop_back();
            }
            size_t b = line.find_first_not_of(" \t");
            if (b == std::string::npos) continue;  // blank-line filtering
            collected.push_back(line.substr(b));
        }
    }

    // deduplicate, preserving first occurrence
    std::vector<std::string> unique;
    std::set<std::string> seen;
    for (auto& s : collected) {
        if (seen.insert(s).second) unique.push_back(std::move(s));
    }

    if (unique.size() < static_cast<size_t>(cfg.count)) {
        throw std::runtime_error("paraphrase generation fell short: requested " +
                                 std::to_string(cfg.count) + ", have " + std::to_string(unique.size()) +
                                 " after deduplication (" +
                                 std::to_string(cfg.count - static_cast<int>(unique.size())) + " short)");
    }

    std::mt19937_64 gen(derive_seed(cfg.seed, "paraphrase-sample", statement));
    std::vector<size_t> picks = sample_without_replacement(unique.size(), static_cast<size_t>(cfg.count), gen);
    std::sort(picks.begin(), picks.end());
    std::vector<std::string> out;
    out.reserve(picks.size());
    for (size_t i : picks) out.push_back(unique[i]);
    return out;
}

std::shared_ptr<backend> make_backend(const run_config& cfg, const answer_matrix& matrix) {
    switch (cfg.backend) {
        case backend_kind::synthetic: {
            oracle_spec spec = cfg.oracle;
            return std::make_shared<synthetic_backend>(cfg.backend_id, spec, &matrix);
        }
        case backend_kind::openai_chat: {
            http_backend_config http = cfg.http;
            http.chat = true;
            http.forced_pair = false;
            if (http.base_url.empty()) throw config_error("openai_chat backend requires backend.base_url");
            return std::make_shared<http_backend>(http);
        }
        case backend_kind::openai_completions: {
            http_backend_config http = cfg.http;
            http.chat = false;
            if (http.base_url.empty()) throw config_error("openai_completions backend requires backend.base_url");
            if (!http.template_id) throw config_error("openai_completions backend requires backend.template");
            return std::make_shared<http_backend>(http);
        }
        case backend_kind::replay: {
            render_options opts;
            if (cfg.http.template_id) opts = {render_mode::raw_template, cfg.http.template_id};
            return std::make_shared<replay_backend>(cfg.backend_id, cfg.cache_dir, opts);
        }
    }
    throw config_error("bad backend kind");
}

}  // namespace qm
