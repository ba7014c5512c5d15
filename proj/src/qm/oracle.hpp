#pragma once

#include <cstdint>
#include <string>

#include "qm/gateway_types.hpp"

namespace qm {

// Deterministic test backend whose yes-probability is a known function of the
// respondent's gold answer, giving closed-form expected metrics.
struct oracle_spec {
    double fidelity = 1.0;   // lambda: weight on the gold answer
    double base_rate = 0.0;  // beta: population prior used for the remainder
    double noise = 0.0;      // sigma of the additive seeded gaussian
    uint64_t seed = 0;

    void validate() const;
};

// p_yes = clamp(lambda*a + (1-lambda)*beta + eps), p_no = 1 - p_yes.
// eps ~ Normal(0, sigma^2), keyed by (respondent, target) only, so every
// paraphrase or context variant of the same pair sees the identical draw.
// gold = -1 marks "no usable gold answer" (zero-shot or neutral-gold
// entries); those collapse to the no-information value beta.
yes_no_mass oracle_mass(const oracle_spec& spec, int gold, const std::string& respondent_id,
                        const std::string& target_id);

struct oracle_expectation {
    double pa = 0.0;
    double bias = 0.0;
};

// Closed forms for the noiseless case, given the question's gold yes-mean m:
//   p(a) = lambda*a + (1-lambda)*beta              (in [0,1], no clamping needed)
//   bias = (lambda*m + (1-lambda)*beta) - m = (1-lambda)*(beta - m)
//   label(a) = 1 iff p(a) >= 0.5 (the tie rule assigns p_yes == p_no to yes),
//              except p(a) == 0 exactly, which yields label 0 here because
//              p_no = 1 > 0; both-zero masses cannot occur with p_no = 1-p_yes.
//   pa = m * [p(1) >= 0.5] + (1-m) * [p(0) < 0.5]
// Throws when noise > 0 (no closed form; use Monte Carlo bounds instead).
oracle_expectation expected_metrics(const oracle_spec& spec, double gold_yes_mean);

}  // namespace qm
