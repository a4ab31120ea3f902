#pragma once

#include <span>
#include <vector>

namespace dml::stats {

double normal_cdf(double x);

// Inverse standard normal CDF. Rational approximation refined by one Halley
// step; absolute error below 1e-9 on (0, 1).
double normal_quantile(double p);

double mean(std::span<const double> v);

// Average of the two middle elements for even sizes.
double median(std::span<const double> v);

// Linear interpolation between order statistics (type 7).
double quantile(std::span<const double> v, double q);

double sample_sd(std::span<const double> v);
double skewness(std::span<const double> v);
double excess_kurtosis(std::span<const double> v);

}  // namespace dml::stats
