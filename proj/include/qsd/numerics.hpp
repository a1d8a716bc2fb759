#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <vector>

namespace qsd {

inline constexpr double kProbTol = 1e-12;  // probability mass-sum tolerance
inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Compensated (Kahan) accumulator.
struct KahanSum {
  double sum = 0.0;
  double carry = 0.0;

  void add(double x) {
    double y = x - carry;
    double t = sum + y;
    carry = (t - sum) - y;
    sum = t;
  }
  double value() const { return sum; }
};

/// log(e^a + e^b), safe for -inf arguments.
inline double log_add_exp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  double hi = a > b ? a : b;
  double lo = a > b ? b : a;
  return hi + std::log1p(std::exp(lo - hi));
}

/// log(sum_i e^{x_i}) with max-normalization and compensated summation.
inline double log_sum_exp(std::span<const double> log_terms) {
  if (log_terms.empty()) return -kInf;
  double hi = -kInf;
  for (double x : log_terms)
    if (x > hi) hi = x;
  if (hi == -kInf) return -kInf;
  KahanSum acc;
  for (double x : log_terms) acc.add(std::exp(x - hi));
  return hi + std::log(acc.value());
}

/// sum_i e^{x_i} on the linear scale (caller guarantees the result fits).
inline double sum_exp(std::span<const double> log_terms) {
  return std::exp(log_sum_exp(log_terms));
}

}  // namespace qsd
