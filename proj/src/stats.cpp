#include "dml/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "dml/errors.hpp"

namespace dml::stats {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    if (p == 1.0) return std::numeric_limits<double>::infinity();
    throw ValidationError("normal_quantile: probability outside [0, 1]");
  }
  // Acklam's coefficients.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (p <= 1.0 - p_low) {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }
  // Halley refinement.
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  x -= u / (1.0 + 0.5 * x * u);
  return x;
}

double mean(std::span<const double> v) {
  if (v.empty()) throw ValidationError("mean of empty vector");
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double median(std::span<const double> v) {
  if (v.empty()) throw ValidationError("median of empty vector");
  std::vector<double> w(v.begin(), v.end());
  const std::size_t mid = w.size() / 2;
  std::nth_element(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(mid), w.end());
  const double upper = w[mid];
  if (w.size() % 2 == 1) return upper;
  const double lower = *std::max_element(w.begin(), w.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lower + upper);
}

double quantile(std::span<const double> v, double q) {
  if (v.empty()) throw ValidationError("quantile of empty vector");
  if (!(q >= 0.0 && q <= 1.0)) throw ValidationError("quantile level outside [0, 1]");
  std::vector<double> w(v.begin(), v.end());
  std::sort(w.begin(), w.end());
  const double h = q * static_cast<double>(w.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, w.size() - 1);
  return w[lo] + (h - static_cast<double>(lo)) * (w[hi] - w[lo]);
}

double sample_sd(std::span<const double> v) {
  if (v.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double m = mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

namespace {

// Central moments m2, m3, m4 (population normalisation).
void central_moments(std::span<const double> v, double& m2, double& m3, double& m4) {
  const double m = mean(v);
  m2 = m3 = m4 = 0.0;
  for (double x : v) {
    const double e = x - m;
    const double e2 = e * e;
    m2 += e2;
    m3 += e2 * e;
    m4 += e2 * e2;
  }
  const auto n = static_cast<double>(v.size());
  m2 /= n;
  m3 /= n;
  m4 /= n;
}

}  // namespace

double skewness(std::span<const double> v) {
  double m2, m3, m4;
  central_moments(v, m2, m3, m4);
  return m3 / std::pow(m2, 1.5);
}

double excess_kurtosis(std::span<const double> v) {
  double m2, m3, m4;
  central_moments(v, m2, m3, m4);
  return m4 / (m2 * m2) - 3.0;
}

}  // namespace dml::stats
