#pragma once

#include <cstddef>
#include <span>

namespace qm {

double mean(std::span<const double> v);

// Sample standard deviation (n-1 denominator); 0 for fewer than two values.
double sample_sd(std::span<const double> v);

// Population RMS deviation about the mean (1/n denominator).
double population_sd(std::span<const double> v);

double pearson_r(std::span<const double> x, std::span<const double> y);

// Two-sided p-value of a t statistic with df degrees of freedom.
double student_t_two_sided_p(double t, size_t df);

}  // namespace qm
