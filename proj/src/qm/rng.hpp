#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "qm/sha256.hpp"

namespace qm {

// All randomness in the harness flows through these helpers so that results
// are reproducible across runs and platforms. std::mt19937_64 has a
// standard-pinned output sequence; std::shuffle and the distribution classes
// do not, so shuffling and sampling are implemented explicitly.

inline uint64_t derive_seed(uint64_t seed, std::string_view domain, std::string_view key = {}) {
    std::string buf = "qm-seed-v1|";
    buf += std::to_string(seed);
    buf += '|';
    buf += domain;
    buf += '|';
    buf += key;
    return sha256_u64(buf);
}

// Deterministic yes/no bit for randomized in-context answers, keyed by the
// full identity of the turn so the assignment is independent of turn order.
inline bool derive_answer_bit(uint64_t seed, std::string_view respondent_id,
                              std::string_view target_id, std::string_view question_id) {
    std::string buf = "qm-rand-answer-v1|";
    buf += std::to_string(seed);
    buf += '|';
    buf += respondent_id;
    buf += '|';
    buf += target_id;
    buf += '|';
    buf += question_id;
    return (sha256_u64(buf) & 1u) != 0;
}

inline uint64_t uniform_below(std::mt19937_64& gen, uint64_t bound) {
    return gen() % bound;  // modulo bias irrelevant here; determinism is what matters
}

template <typename T>
void fisher_yates_shuffle(std::vector<T>& v, std::mt19937_64& gen) {
    for (size_t i = v.size(); i > 1; --i) {
        size_t j = static_cast<size_t>(uniform_below(gen, i));
        std::swap(v[i - 1], v[j]);
    }
}

// First k elements of a seeded shuffle, i.e. a uniform sample without
// replacement of k indices from [0, n).
std::vector<size_t> sample_without_replacement(size_t n, size_t k, std::mt19937_64& gen);

// Box-Muller normal draw from two pinned mt19937_64 outputs.
double normal_draw(std::mt19937_64& gen, double mean, double stddev);

}  // namespace qm
