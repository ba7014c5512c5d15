#include "qm/stats.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <cmath>
#include <stdexcept>

namespace qm {

double mean(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("mean: empty input");
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

double sample_sd(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    double m = mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

double population_sd(std::span<const double> v) {
    if (v.empty()) throw std::invalid_argument("population_sd: empty input");
    double m = mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size()));
}

double pearson_r(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw std::invalid_argument("pearson_r: length mismatch");
    if (x.size() < 3) throw std::invalid_argument("pearson_r: need at least 3 pairs");
    double mx = mean(x);
    double my = mean(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (size_t i = 0; i < x.size(); ++i) {
        double dx = x[i] - mx;
        double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw std::invalid_argument("pearson_r: degenerate");
    return sxy / std::sqrt(sxx * syy);
}

double student_t_two_sided_p(double t, size_t df) {
    if (df == 0) throw std::invalid_argument("student_t_two_sided_p: df must be positive");
    boost::math::students_t dist(static_cast<double>(df));
    double tail = boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
    return 2.0 * tail;
}

}  // namespace qm
