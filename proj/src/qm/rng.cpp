#include "qm/rng.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

namespace qm {

std::vector<size_t> sample_without_replacement(size_t n, size_t k, std::mt19937_64& gen) {
    std::vector<size_t> idx(n);
    std::iota(idx.begin(), idx.end(), size_t{0});
    if (k > n) k = n;
    for (size_t i = 0; i < k; ++i) {
        size_t j = i + static_cast<size_t>(uniform_below(gen, n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
}

double normal_draw(std::mt19937_64& gen, double mean, double stddev) {
    // map u64 to (0,1]; u1 must be nonzero for the log
    auto unit = [](uint64_t x) { return (static_cast<double>(x >> 11) + 1.0) * 0x1.0p-53; };
    double u1 = unit(gen());
    double u2 = unit(gen());
    double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    return mean + stddev * z;
}

}  // namespace qm
