#pragma once

#include <atomic>
#include <condition_variable>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>

#include "qm/corpus.hpp"
#include "qm/gateway_types.hpp"
#include "qm/oracle.hpp"
#include "qm/prompt.hpp"

namespace qm {

// Content-addressed append-only record store: one JSON file per
// (prompt hash, backend scope), sharded by hash prefix. Concurrent writers
// are safe; identical keys carry identical values by construction, so
// last-write-wins is harmless. Decoding parameters are constants already
// folded into every prompt hash.
class query_cache {
public:
    explicit query_cache(std::filesystem::path dir);

    std::optional<query_record> get(const std::string& hash, const std::string& scope) const;
    void put(const query_record& record) const;  // scope = record.backend_id
    void put(const query_record& record, const std::string& scope) const;
    const std::filesystem::path& dir() const { return dir_; }

private:
    std::filesystem::path path_for(const std::string& hash, const std::string& scope) const;
    std::filesystem::path dir_;
};

// Identifies the plan entry a prompt belongs to; the synthetic backend keys
// its draws on this, network backends ignore it.
struct entry_meta {
    std::string respondent_id;  // empty for respondent-independent prompts
    std::string target_id;
};

struct backend_error : std::runtime_error {
    backend_error(const std::string& msg, std::string prompt_hash)
        : std::runtime_error(msg), hash(std::move(prompt_hash)) {}
    std::string hash;
};

class backend {
public:
    virtual ~backend() = default;
    virtual const std::string& id() const = 0;
    virtual render_options render_opts() const = 0;
    virtual bool is_network() const { return false; }
    virtual query_record query(const rendered_prompt& prompt, const entry_meta& meta) = 0;
};

// Pure oracle backend; emits a two-entry distribution over "yes"/"no".
class synthetic_backend : public backend {
public:
    synthetic_backend(std::string id, oracle_spec spec, const answer_matrix* matrix);

    const std::string& id() const override { return id_; }
    render_options render_opts() const override { return {}; }
    query_record query(const rendered_prompt& prompt, const entry_meta& meta) override;

private:
    std::string id_;
    oracle_spec spec_;
    const answer_matrix* matrix_;
};

struct http_backend_config {
    std::string id;
    std::string base_url;   // e.g. http://127.0.0.1:8089
    std::string model;
    bool chat = true;       // chat-completions vs raw completions endpoint
    std::optional<std::string> template_id;  // required for raw completions
    bool forced_pair = false;
    std::string api_key_env = "QM_API_KEY";
    int timeout_ms = 30000;
    int retry_attempts = 3;
    int retry_backoff_ms = 250;
};

// OpenAI-compatible HTTP backend. Chat mode posts messages with
// top_logprobs=k; completions mode posts the raw template render; forced-pair
// mode scores "yes" and "no" via echo+logprobs, one call per candidate.
class http_backend : public backend {
public:
    explicit http_backend(http_backend_config cfg);
    ~http_backend() override;

    const std::string& id() const override { return cfg_.id; }
    render_options render_opts() const override;
    bool is_network() const override { return true; }
    query_record query(const rendered_prompt& prompt, const entry_meta& meta) override;

    // Free-form chat generation for the paraphrase pipeline.
    std::string chat_text(const std::vector<std::pair<std::string, std::string>>& messages,
                          double temperature, uint64_t seed);

    size_t requests_made() const { return requests_.load(); }

private:
    struct impl;
    nlohmann::json post_with_retries(const std::string& path, const nlohmann::json& body,
                                     const std::string& hash, int* retries_out);
    http_backend_config cfg_;
    std::unique_ptr<impl> impl_;
    std::atomic<size_t> requests_{0};
};

// Serves answers from a warm cache only; any miss is an error carrying the
// prompt hash.
class replay_backend : public backend {
public:
    replay_backend(std::string id, std::filesystem::path cache_dir, render_options opts);

    const std::string& id() const override { return id_; }
    render_options render_opts() const override { return opts_; }
    query_record query(const rendered_prompt& prompt, const entry_meta& meta) override;

private:
    std::string id_;
    query_cache cache_;
    render_options opts_;
};

// Cache-through resolution layer. Network backends are cached and deduped
// in flight; pure backends are recomputed.
class gateway {
public:
    gateway(std::shared_ptr<backend> be, std::optional<std::filesystem::path> cache_dir);

    yes_no_mass resolve(const rendered_prompt& prompt, const entry_meta& meta, int* retries_out = nullptr);

    backend& be() { return *backend_; }
    size_t cache_hits() const { return cache_hits_.load(); }
    size_t backend_queries() const { return backend_queries_.load(); }

private:
    std::shared_ptr<backend> backend_;
    std::optional<query_cache> cache_;
    std::mutex inflight_mu_;
    std::condition_variable inflight_cv_;
    std::set<std::string> inflight_;
    std::atomic<size_t> cache_hits_{0};
    std::atomic<size_t> backend_queries_{0};
};

std::string utc_timestamp();

}  // namespace qm
