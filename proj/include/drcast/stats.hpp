#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <stdexcept>
#include <vector>

namespace drcast {

inline double mean(std::span<const double> v) {
  if (v.empty()) throw std::invalid_argument("mean of empty range");
  double s = 0.0;
  for (const double x : v) s += x;
  return s / static_cast<double>(v.size());
}

// Sample variance with n-1 denominator.
inline double sample_variance(std::span<const double> v) {
  if (v.size() < 2) throw std::invalid_argument("sample variance needs >= 2 values");
  const double m = mean(v);
  double s = 0.0;
  for (const double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size() - 1);
}

inline double population_variance(std::span<const double> v) {
  const double m = mean(v);
  double s = 0.0;
  for (const double x : v) s += (x - m) * (x - m);
  return s / static_cast<double>(v.size());
}

// Quantile with linear interpolation between closest order statistics,
// q in [0, 1]. Used for every percentile in the project so reports and
// initializers agree on the convention.
inline double quantile(std::vector<double> values, double q) {
  if (values.empty()) throw std::invalid_argument("quantile of empty range");
  if (q < 0.0 || q > 1.0) throw std::invalid_argument("quantile level outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double pos = q * static_cast<double>(values.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= values.size()) return values.back();
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[lo + 1] - values[lo]);
}

inline double median(std::vector<double> values) { return quantile(std::move(values), 0.5); }

inline double log_sum_exp(std::span<const double> logs) {
  if (logs.empty()) throw std::invalid_argument("log_sum_exp of empty range");
  const double m = *std::max_element(logs.begin(), logs.end());
  if (!std::isfinite(m)) return m;  // all -inf, or a nan poisoning the max
  double s = 0.0;
  for (const double x : logs) s += std::exp(x - m);
  return m + std::log(s);
}

inline double gaussian_log_pdf(double y, double mu, double var) {
  const double d = y - mu;
  return -0.5 * (std::log(2.0 * std::numbers::pi * var) + d * d / var);
}

}  // namespace drcast
