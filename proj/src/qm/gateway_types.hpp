#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace qm {

inline constexpr double k_mass_sum_slack = 1e-9;

struct token_entry {
    std::string token;
    double prob = 0.0;
};

// Truncated top-k next-token distribution as returned by a backend.
struct token_distribution {
    std::vector<token_entry> entries;  // sorted by probability, descending
    int k = 10;
    bool truncated = true;

    // Throws on rank overflow, out-of-range probabilities, mass > 1, or
    // unsorted entries.
    void validate() const;
};

struct yes_no_mass {
    double p_yes_raw = 0.0;
    double p_no_raw = 0.0;
};

// Sums the probability of tokens that equal "yes" ("no") after stripping
// leading/trailing whitespace and ASCII case-folding. Exact equality only:
// "yes." does not match.
yes_no_mass extract_yes_no(const token_distribution& dist);

struct decoding_params {
    double temperature = 1.0;
    int top_k = 10;
};

struct query_record {
    std::string hash;
    std::string backend_id;
    decoding_params params;
    std::optional<token_distribution> distribution;
    std::optional<yes_no_mass> pair;   // forced-pair result
    std::optional<std::string> text;   // free-form generation (paraphrase calls)
    std::string timestamp;
    int retries = 0;
    bool logprobs_converted = false;  // backend returned log-probabilities

    yes_no_mass mass() const;  // extract or pass through

    nlohmann::json to_json() const;
    static query_record from_json(const nlohmann::json& j);
};

}  // namespace qm
