#include "qm/oracle.hpp"

#include <algorithm>
#include <stdexcept>

#include "qm/rng.hpp"

namespace qm {

void oracle_spec::validate() const {
    if (fidelity < 0.0 || fidelity > 1.0) throw std::invalid_argument("oracle fidelity must be in [0,1]");
    if (base_rate < 0.0 || base_rate > 1.0) throw std::invalid_argument("oracle base_rate must be in [0,1]");
    if (noise < 0.0) throw std::invalid_argument("oracle noise must be >= 0");
}

yes_no_mass oracle_mass(const oracle_spec& spec, int gold, const std::string& respondent_id,
                        const std::string& target_id) {
    spec.validate();
    double a = gold < 0 ? spec.base_rate : static_cast<double>(gold);
    double p = spec.fidelity * a + (1.0 - spec.fidelity) * spec.base_rate;
    if (spec.noise > 0.0) {
        std::mt19937_64 gen(derive_seed(spec.seed, "oracle-noise", respondent_id + "|" + target_id));
        p += normal_draw(gen, 0.0, spec.noise);
    }
    p = std::clamp(p, 0.0, 1.0);
    return {p, 1.0 - p};
}

oracle_expectation expected_metrics(const oracle_spec& spec, double gold_yes_mean) {
    spec.validate();
    if (spec.noise > 0.0) {
        throw std::invalid_argument("expected_metrics has no closed form with noise; use Monte Carlo bounds instead");
    }
    double m = gold_yes_mean;
    double p1 = spec.fidelity + (1.0 - spec.fidelity) * spec.base_rate;
    double p0 = (1.0 - spec.fidelity) * spec.base_rate;

    auto label_of = [](double p_yes) {
        double p_no = 1.0 - p_yes;
        if (p_yes == 0.0 && p_no == 0.0) return -1;  // unreachable with complementary masses
        return p_no > p_yes ? 0 : 1;
    };

    oracle_expectation e;
    e.bias = (1.0 - spec.fidelity) * (spec.base_rate - m);
    e.pa = m * (label_of(p1) == 1 ? 1.0 : 0.0) + (1.0 - m) * (label_of(p0) == 0 ? 1.0 : 0.0);
    return e;
}

}  // namespace qm
