#include "qm/gateway_types.hpp"

#include <cctype>
#include <stdexcept>

namespace qm {

void token_distribution::validate() const {
    if (entries.size() > static_cast<size_t>(k)) {
        throw std::runtime_error("rank overflow: backend returned " + std::to_string(entries.size()) +
                                 " entries with k=" + std::to_string(k));
    }
    double sum = 0.0;
    double prev = 1.0;
    for (const auto& e : entries) {
        if (!(e.prob > 0.0) || e.prob > 1.0) {
            throw std::runtime_error("token probability out of (0,1]: '" + e.token + "'");
        }
        if (e.prob > prev) throw std::runtime_error("token distribution not sorted by probability");
        prev = e.prob;
        sum += e.prob;
    }
    if (sum > 1.0 + k_mass_sum_slack) {
        throw std::runtime_error("token probabilities sum to " + std::to_string(sum) + " > 1");
    }
}

namespace {

std::string strip_and_fold(const std::string& s) {
    size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    std::string out = s.substr(b, e - b);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

}  // namespace

yes_no_mass extract_yes_no(const token_distribution& dist) {
    // pure sum over entries; tolerant of entry order (backends validate
    // sortedness when they construct distributions)
    yes_no_mass m;
    for (const auto& e : dist.entries) {
        std::string t = strip_and_fold(e.token);
        if (t == "yes") {
            m.p_yes_raw += e.prob;
        } else if (t == "no") {
            m.p_no_raw += e.prob;
        }
    }
    return m;
}

yes_no_mass query_record::mass() const {
    if (pair) return *pair;
    if (distribution) return extract_yes_no(*distribution);
    throw std::runtime_error("query record " + hash + " carries no result");
}

nlohmann::json query_record::to_json() const {
    nlohmann::json j;
    j["hash"] = hash;
    j["backend_id"] = backend_id;
    j["params"] = {{"temperature", params.temperature}, {"top_k", params.top_k}};
    if (distribution) {
        nlohmann::json entries = nlohmann::json::array();
        for (const auto& e : distribution->entries) entries.push_back({e.token, e.prob});
        j["distribution"] = {
            {"entries", entries}, {"k", distribution->k}, {"truncated", distribution->truncated}};
    }
    if (pair) j["pair"] = {{"p_yes", pair->p_yes_raw}, {"p_no", pair->p_no_raw}};
    if (text) j["text"] = *text;
    j["timestamp"] = timestamp;
    j["retries"] = retries;
    if (logprobs_converted) j["logprobs_converted"] = true;
    return j;
}

query_record query_record::from_json(const nlohmann::json& j) {
    query_record r;
    r.hash = j.at("hash").get<std::string>();
    r.backend_id = j.at("backend_id").get<std::string>();
    r.params.temperature = j.at("params").at("temperature").get<double>();
    r.params.top_k = j.at("params").at("top_k").get<int>();
    if (j.contains("distribution")) {
        token_distribution d;
        d.k = j["distribution"].at("k").get<int>();
        d.truncated = j["distribution"].at("truncated").get<bool>();
        for (const auto& e : j["distribution"].at("entries")) {
            d.entries.push_back({e.at(0).get<std::string>(), e.at(1).get<double>()});
        }
        r.distribution = std::move(d);
    }
    if (j.contains("pair")) {
        r.pair = yes_no_mass{j["pair"].at("p_yes").get<double>(), j["pair"].at("p_no").get<double>()};
    }
    if (j.contains("text")) r.text = j["text"].get<std::string>();
    r.timestamp = j.value("timestamp", "");
    r.retries = j.value("retries", 0);
    r.logprobs_converted = j.value("logprobs_converted", false);
    return r;
}

}  // namespace qm
