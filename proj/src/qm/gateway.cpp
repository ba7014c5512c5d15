#include "qm/gateway.hpp"

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <thread>

#include "qm/rng.hpp"
#include "qm/sha256.hpp"

namespace qm {

std::string utc_timestamp() {
    auto now = std::chrono::system_clock::now();
    std::time_t t = std::chrono::system_clock::to_time_t(now);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// ---------------------------------------------------------------------------
// query_cache

query_cache::query_cache(std::filesystem::path dir) : dir_(std::move(dir)) {
    std::filesystem::create_directories(dir_);
}

std::filesystem::path query_cache::path_for(const std::string& hash, const std::string& scope) const {
    if (hash.size() < 3) throw std::invalid_argument("cache key too short: '" + hash + "'");
    return dir_ / hash.substr(0, 2) / (hash + "-" + sha256_hex(scope).substr(0, 8) + ".json");
}

std::optional<query_record> query_cache::get(const std::string& hash, const std::string& scope) const {
    std::ifstream in(path_for(hash, scope));
    if (!in) return std::nullopt;
    nlohmann::json j;
    in >> j;
    return query_record::from_json(j);
}

void query_cache::put(const query_record& record) const { put(record, record.backend_id); }

void query_cache::put(const query_record& record, const std::string& scope) const {
    auto path = path_for(record.hash, scope);
    std::filesystem::create_directories(path.parent_path());
    // write-then-rename keeps concurrent readers off partial files
    auto tmp = path;
    tmp += "." + std::to_string(reinterpret_cast<uintptr_t>(&record)) + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write cache record: " + tmp.string());
        out << record.to_json().dump() << '\n';
    }
    std::filesystem::rename(tmp, path);
}

// ---------------------------------------------------------------------------
// synthetic_backend

synthetic_backend::synthetic_backend(std::string id, oracle_spec spec, const answer_matrix* matrix)
    : id_(std::move(id)), spec_(spec), matrix_(matrix) {
    spec_.validate();
    if (!matrix_) throw std::invalid_argument("synthetic backend requires a corpus");
}

query_record synthetic_backend::query(const rendered_prompt& prompt, const entry_meta& meta) {
    int gold = -1;
    if (!meta.respondent_id.empty()) {
        auto ri = matrix_->respondent_index(meta.respondent_id);
        auto qi = matrix_->question_index(meta.target_id);
        if (ri && qi) {
            answer a = matrix_->cell(*ri, *qi);
            if (a != answer::missing) gold = a == answer::yes ? 1 : 0;
        }
    }
    yes_no_mass m = oracle_mass(spec_, gold, meta.respondent_id, meta.target_id);

    // synthesized top-k shape: at most the two answer tokens, zero-mass
    // entries omitted
    token_distribution dist;
    dist.k = k_top_k;
    if (m.p_yes_raw >= m.p_no_raw) {
        if (m.p_yes_raw > 0.0) dist.entries.push_back({"yes", m.p_yes_raw});
        if (m.p_no_raw > 0.0) dist.entries.push_back({"no", m.p_no_raw});
    } else {
        if (m.p_no_raw > 0.0) dist.entries.push_back({"no", m.p_no_raw});
        if (m.p_yes_raw > 0.0) dist.entries.push_back({"yes", m.p_yes_raw});
    }
    dist.validate();

    query_record rec;
    rec.hash = prompt.canonical_hash;
    rec.backend_id = id_;
    rec.distribution = std::move(dist);
    rec.timestamp = utc_timestamp();
    return rec;
}

// ---------------------------------------------------------------------------
// http_backend

struct http_backend::impl {
    explicit impl(const http_backend_config& cfg) : client(cfg.base_url) {
        client.set_connection_timeout(cfg.timeout_ms / 1000, (cfg.timeout_ms % 1000) * 1000);
        client.set_read_timeout(cfg.timeout_ms / 1000, (cfg.timeout_ms % 1000) * 1000);
        client.set_write_timeout(cfg.timeout_ms / 1000, (cfg.timeout_ms % 1000) * 1000);
    }
    std::string bearer;
    httplib::Client client;
    std::mutex mu;  // httplib clients are not thread-safe for concurrent requests
};

http_backend::http_backend(http_backend_config cfg) : cfg_(std::move(cfg)) {
    if (!cfg_.chat && !cfg_.template_id) {
        throw std::invalid_argument("completions backend requires a template id");
    }
    if (cfg_.forced_pair && cfg_.chat) {
        throw std::invalid_argument("forced-pair mode requires the completions endpoint");
    }
    if (cfg_.template_id && !template_supported(*cfg_.template_id)) {
        throw std::invalid_argument("unknown template_id '" + *cfg_.template_id + "'");
    }
    impl_ = std::make_unique<impl>(cfg_);
    if (const char* key = std::getenv(cfg_.api_key_env.c_str()); key && *key) impl_->bearer = key;
}

http_backend::~http_backend() = default;

render_options http_backend::render_opts() const {
    if (cfg_.chat) return {render_mode::chat_messages, std::nullopt};
    return {render_mode::raw_template, cfg_.template_id};
}

nlohmann::json http_backend::post_with_retries(const std::string& path, const nlohmann::json& body,
                                               const std::string& hash, int* retries_out) {
    std::string payload = body.dump();
    httplib::Headers headers;
    if (!impl_->bearer.empty()) headers.emplace("Authorization", "Bearer " + impl_->bearer);

    std::string last_error;
    for (int attempt = 0; attempt < cfg_.retry_attempts; ++attempt) {
        if (attempt > 0) {
            int base = cfg_.retry_backoff_ms << (attempt - 1);
            std::mt19937_64 jitter_gen(sha256_u64("jitter|" + hash + "|" + std::to_string(attempt)));
            int jitter = base > 1 ? static_cast<int>(jitter_gen() % static_cast<uint64_t>(base / 2 + 1)) : 0;
            std::this_thread::sleep_for(std::chrono::milliseconds(base + jitter));
        }
        httplib::Result res;
        {
            std::lock_guard<std::mutex> lock(impl_->mu);
            ++requests_;
            res = impl_->client.Post(path, headers, payload, "application/json");
        }
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            if (retries_out) ++*retries_out;
            continue;
        }
        if (res->status != 200) {
            last_error = "http status " + std::to_string(res->status) + ": " + res->body.substr(0, 200);
            if (retries_out) ++*retries_out;
            continue;
        }
        try {
            return nlohmann::json::parse(res->body);
        } catch (const std::exception& e) {
            last_error = std::string("invalid json response: ") + e.what();
            if (retries_out) ++*retries_out;
        }
    }
    if (retries_out && *retries_out > 0) --*retries_out;  // final failure is not a retry
    throw backend_error("backend '" + cfg_.id + "' failed after " + std::to_string(cfg_.retry_attempts) +
                            " attempts: " + last_error,
                        hash);
}

namespace {

token_distribution distribution_from_pairs(std::vector<token_entry> entries, bool converted_from_logprobs) {
    (void)converted_from_logprobs;
    std::stable_sort(entries.begin(), entries.end(),
                     [](const token_entry& a, const token_entry& b) { return a.prob > b.prob; });
    token_distribution dist;
    dist.k = k_top_k;
    dist.entries = std::move(entries);
    dist.validate();
    return dist;
}

}  // namespace

query_record http_backend::query(const rendered_prompt& prompt, const entry_meta&) {
    query_record rec;
    rec.hash = prompt.canonical_hash;
    rec.backend_id = cfg_.id;
    rec.timestamp = utc_timestamp();
    int retries = 0;

    if (cfg_.forced_pair) {
        const std::string render = render_raw(prompt, *cfg_.template_id);
        auto score_candidate = [&](const std::string& candidate) {
            nlohmann::json body{{"model", cfg_.model},
                                {"prompt", render + candidate},
                                {"max_tokens", 0},
                                {"echo", true},
                                {"logprobs", 1},
                                {"temperature", k_temperature}};
            nlohmann::json j = post_with_retries("/v1/completions", body, rec.hash, &retries);
            const auto& lp = j.at("choices").at(0).at("logprobs").at("token_logprobs");
            if (lp.empty() || lp.back().is_null()) {
                throw backend_error("forced-pair response carries no scored token", rec.hash);
            }
            return std::exp(lp.back().get<double>());
        };
        // both requests succeed or the pair fails atomically via the throw above
        double p_yes = score_candidate("yes");
        double p_no = score_candidate("no");
        rec.pair = yes_no_mass{p_yes, p_no};
        rec.logprobs_converted = true;
        rec.retries = retries;
        return rec;
    }

    std::vector<token_entry> entries;
    bool converted = false;
    if (cfg_.chat) {
        nlohmann::json messages = nlohmann::json::array();
        for (const auto& t : prompt.turns) {
            messages.push_back({{"role", t.role == turn_role::user ? "user" : "assistant"},
                                {"content", t.text}});
        }
        nlohmann::json body{{"model", cfg_.model},
                            {"messages", messages},
                            {"max_tokens", 1},
                            {"temperature", k_temperature},
                            {"logprobs", true},
                            {"top_logprobs", k_top_k}};
        nlohmann::json j = post_with_retries("/v1/chat/completions", body, rec.hash, &retries);
        const auto& content = j.at("choices").at(0).at("logprobs").at("content");
        if (content.empty()) throw backend_error("chat response carries no logprobs", rec.hash);
        for (const auto& e : content.at(0).at("top_logprobs")) {
            entries.push_back({e.at("token").get<std::string>(), std::exp(e.at("logprob").get<double>())});
        }
        converted = true;
    } else {
        nlohmann::json body{{"model", cfg_.model},
                            {"prompt", render_raw(prompt, *cfg_.template_id)},
                            {"max_tokens", 1},
                            {"temperature", k_temperature},
                            {"logprobs", k_top_k}};
        nlohmann::json j = post_with_retries("/v1/completions", body, rec.hash, &retries);
        const auto& top = j.at("choices").at(0).at("logprobs").at("top_logprobs");
        if (top.empty()) throw backend_error("completions response carries no logprobs", rec.hash);
        for (auto it = top.at(0).begin(); it != top.at(0).end(); ++it) {
            entries.push_back({it.key(), std::exp(it.value().get<double>())});
        }
        converted = true;
    }

    rec.distribution = distribution_from_pairs(std::move(entries), converted);
    rec.logprobs_converted = converted;
    rec.retries = retries;
    return rec;
}

std::string http_backend::chat_text(const std::vector<std::pair<std::string, std::string>>& messages,
                                    double temperature, uint64_t seed) {
    nlohmann::json msg_json = nlohmann::json::array();
    for (const auto& [role, content] : messages) {
        msg_json.push_back({{"role", role}, {"content", content}});
    }
    nlohmann::json body{{"model", cfg_.model},
                        {"messages", msg_json},
                        {"temperature", temperature},
                        {"seed", seed}};
    int retries = 0;
    nlohmann::json j = post_with_retries("/v1/chat/completions", body,
                                         sha256_hex("chat-text|" + body.dump()), &retries);
    return j.at("choices").at(0).at("message").at("content").get<std::string>();
}

// ---------------------------------------------------------------------------
// replay_backend

replay_backend::replay_backend(std::string id, std::filesystem::path cache_dir, render_options opts)
    : id_(std::move(id)), cache_(std::move(cache_dir)), opts_(opts) {}

query_record replay_backend::query(const rendered_prompt& prompt, const entry_meta&) {
    auto rec = cache_.get(prompt.canonical_hash, id_);
    if (!rec) {
        throw backend_error("replay cache has no record for prompt " + prompt.canonical_hash,
                            prompt.canonical_hash);
    }
    return *rec;
}

// ---------------------------------------------------------------------------
// gateway

gateway::gateway(std::shared_ptr<backend> be, std::optional<std::filesystem::path> cache_dir)
    : backend_(std::move(be)) {
    if (cache_dir && backend_->is_network()) cache_.emplace(*cache_dir);
}

yes_no_mass gateway::resolve(const rendered_prompt& prompt, const entry_meta& meta, int* retries_out) {
    const std::string& hash = prompt.canonical_hash;
    if (retries_out) *retries_out = 0;

    if (!cache_) {
        ++backend_queries_;
        query_record rec = backend_->query(prompt, meta);
        if (retries_out) *retries_out = rec.retries;
        return rec.mass();
    }

    if (auto rec = cache_->get(hash, backend_->id())) {
        ++cache_hits_;
        return rec->mass();
    }

    // dedupe concurrent identical prompts so each hash hits the network once
    {
        std::unique_lock<std::mutex> lock(inflight_mu_);
        while (inflight_.count(hash)) inflight_cv_.wait(lock);
        if (auto rec = cache_->get(hash, backend_->id())) {
            ++cache_hits_;
            return rec->mass();
        }
        inflight_.insert(hash);
    }

    try {
        ++backend_queries_;
        query_record rec = backend_->query(prompt, meta);
        cache_->put(rec);
        {
            std::lock_guard<std::mutex> lock(inflight_mu_);
            inflight_.erase(hash);
        }
        inflight_cv_.notify_all();
        if (retries_out) *retries_out = rec.retries;
        return rec.mass();
    } catch (...) {
        {
            std::lock_guard<std::mutex> lock(inflight_mu_);
            inflight_.erase(hash);
        }
        inflight_cv_.notify_all();
        throw;
    }
}

}  // namespace qm
