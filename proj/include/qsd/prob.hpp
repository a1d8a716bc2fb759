#pragma once

#include <vector>

#include "qsd/errors.hpp"
#include "qsd/numerics.hpp"

namespace qsd {

// States of the transient class C are numbered 1..N; state 0 is the cemetery.
// A std::vector<double> of length N indexed by [k-1] holds per-state values.

/// Probability distribution on C = {1..N}.  Entries are >= 0 and sum to 1;
/// inputs off by at most kProbTol are renormalized on construction.
class ProbDist {
 public:
  explicit ProbDist(std::vector<double> mass);

  /// Normalizes an arbitrary nonnegative vector (entries in [-clamp_tol, 0)
  /// are clamped to zero first).  Throws InvalidDistribution on negative
  /// entries below -clamp_tol or an empty/zero vector.
  static ProbDist normalized(std::vector<double> mass, double clamp_tol = 0.0);
  static ProbDist delta(int state, int n);
  static ProbDist uniform(int n);

  int size() const { return static_cast<int>(mass_.size()); }
  double prob(int state) const { return mass_[static_cast<size_t>(state) - 1]; }
  const std::vector<double>& mass() const { return mass_; }

 private:
  struct raw_tag {};
  ProbDist(std::vector<double> mass, raw_tag) : mass_(std::move(mass)) {}
  std::vector<double> mass_;
};

/// Sub-probability pair on C union {0}: mass at the cemetery plus a vector
/// on C, summing to 1.
class SubProbDist {
 public:
  SubProbDist(double mass0, std::vector<double> mass);

  /// Embeds a ProbDist as a law on C union {0} with zero cemetery mass.
  static SubProbDist extend(const ProbDist& f);

  int size() const { return static_cast<int>(mass_.size()); }
  double mass0() const { return mass0_; }
  double prob(int state) const {
    return state == 0 ? mass0_ : mass_[static_cast<size_t>(state) - 1];
  }
  const std::vector<double>& mass() const { return mass_; }

 private:
  double mass0_;
  std::vector<double> mass_;
};

/// Total variation distance, (1/2) sum |f_i - g_i|.
double tv_distance(const ProbDist& f, const ProbDist& g);
double tv_distance(const SubProbDist& f, const SubProbDist& g);

}  // namespace qsd
