#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "qm/corpus.hpp"
#include "qm/gateway.hpp"
#include "qm/prompt.hpp"

namespace qm {

enum class condition_kind {
    qm,
    zero_shot,
    random_context,
    paraphrase_study,
    permutation_ablation,
    length_ablation,
};

std::string to_string(condition_kind c);
condition_kind condition_from_string(const std::string& s);

enum class backend_kind { synthetic, openai_chat, openai_completions, replay };

struct config_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct run_config {
    std::string run_id;
    std::filesystem::path output_dir;

    std::filesystem::path matrix_path;
    std::filesystem::path questions_path;

    backend_kind backend = backend_kind::synthetic;
    std::string backend_id;
    http_backend_config http;   // openai_* / replay connection details
    oracle_spec oracle;         // synthetic backend parameters

    std::vector<condition_kind> conditions;
    std::vector<std::string> targets;  // empty = all attitude questions
    int parallelism = 1;
    std::filesystem::path cache_dir;   // default: output_dir / "cache"

    std::map<condition_kind, uint64_t> seeds;

    // paraphrase study
    std::filesystem::path paraphrase_dir;
    std::vector<std::string> paraphrase_targets;  // empty = run targets
    std::vector<condition_kind> paraphrase_modes{condition_kind::qm};
    int subsample_factor = 10;

    permutation_params permutation;
    truncation_params truncation{{0.25, 0.5, 0.75}, true};

    uint64_t seed_for(condition_kind c) const;
};

run_config load_run_config(const std::filesystem::path& path);

struct plan_entry {
    condition_kind condition;
    int variant = 0;             // paraphrase index or ablation spec index
    std::string sub_condition;   // paraphrase base mode (qm / zero_shot / random_context)
    std::string respondent_id;   // empty for respondent-independent prompts
    std::string target_id;
    std::string spec_digest;
    std::string canonical_hash;
};

struct run_manifest {
    std::string run_id;
    std::string backend_id;
    render_options render;
    std::vector<plan_entry> entries;
    std::vector<rendered_prompt> prompts;  // parallel to entries; not serialized

    // per-condition ContextSpec variants, for reporting
    std::map<condition_kind, std::vector<context_spec>> variant_specs;
    std::vector<size_t> paraphrase_subsample;  // respondent indices, ascending

    nlohmann::json header_json(const run_config& cfg) const;
    std::string entry_line(size_t i) const;  // manifest.jsonl line for entry i
};

std::string manifest_digest(const run_manifest& m);

// Pure function of (config, corpus): identical inputs give identical
// manifests, entry order included.
run_manifest plan(const run_config& cfg, const answer_matrix& matrix);

struct resolved_entry {
    size_t entry_index = 0;
    yes_no_mass mass;
    int retries = 0;
};

struct result_set {
    std::vector<std::optional<yes_no_mass>> masses;  // parallel to manifest entries
    std::vector<size_t> unresolved;                  // entry indices
    bool complete() const { return unresolved.empty(); }
};

struct execute_options {
    int parallelism = 1;
    // testing hook: stop issuing new work after this many resolutions
    std::optional<size_t> stop_after;
};

// Resolves every manifest entry through the gateway. Completions are
// checkpointed (crash-safe appends); on completion the canonical
// results.jsonl is written in manifest order. Resuming re-issues only
// unresolved entries.
result_set execute(const run_manifest& manifest, gateway& gw,
                   const std::filesystem::path& run_dir, const execute_options& opts);

// Persistence helpers shared by the CLI and tests.
void write_manifest(const run_manifest& manifest, const run_config& cfg,
                    const std::filesystem::path& run_dir);
void write_results(const run_manifest& manifest, const result_set& results,
                   const std::filesystem::path& run_dir);
result_set load_results(const run_manifest& manifest, const std::filesystem::path& run_dir);

// Paraphrase sets: one file per target, one paraphrase per line, UTF-8.
std::vector<std::string> load_paraphrase_file(const std::filesystem::path& path);

struct paraphrase_generation_config {
    int count = 50;
    int calls = 5;
    int per_call = 20;
    double temperature = 1.0;
    uint64_t seed = 0;
};

// `calls` chat completions asking for `per_call` paraphrases each, blank-line
// filtering, exact-match deduplication, then a seeded sample of `count`
// survivors. Responses are cached so replays are byte-identical.
std::vector<std::string> generate_paraphrases(const std::string& statement, http_backend* be,
                                              const query_cache& cache,
                                              const paraphrase_generation_config& cfg);

std::shared_ptr<backend> make_backend(const run_config& cfg, const answer_matrix& matrix);

}  // namespace qm
