#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>

namespace rsmm {

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;  // log(2π)

/// Density floor added to every subspace density before taking logs.
inline constexpr double kDensityEpsilon = std::numeric_limits<double>::min();
inline const double kLogDensityEpsilon = std::log(kDensityEpsilon);

/// log(exp(a) + exp(b)) without overflow or underflow.
inline double log_add_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

/// log Σ exp(x_i); -inf for an empty range or when every term is -inf.
inline double log_sum_exp(std::span<const double> xs) {
  if (xs.empty()) return -std::numeric_limits<double>::infinity();
  const double hi = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(hi)) return hi;
  double sum = 0.0;
  for (double x : xs) sum += std::exp(x - hi);
  return hi + std::log(sum);
}

/// log(exp(log_density) + ε): finite for any input, including -inf.
inline double guarded_log_density(double log_density) { return log_add_exp(log_density, kLogDensityEpsilon); }

}  // namespace rsmm
