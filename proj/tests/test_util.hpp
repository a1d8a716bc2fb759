#pragma once

#include <cmath>
#include <vector>

#include "qsd/bd_model.hpp"
#include "qsd/generator.hpp"
#include "qsd/prob.hpp"
#include "qsd/rng.hpp"

namespace qsd::test {

/// The two-state chain q_{10} = 1, q_{12} = 1, q_{21} = 2 used throughout:
/// its QSD is m = (2 - sqrt(2), sqrt(2) - 1) with lambda_m = 2 - sqrt(2).
inline Generator toy2() {
  return Generator::validate({{1, 0, 1.0}, {1, 2, 1.0}, {2, 1, 2.0}}, 2);
}

inline BirthDeathModel toy2_bd() {
  return BirthDeathModel::create({1.0, 0.0}, {1.0, 2.0});
}

inline constexpr double kToyM1 = 0.58578643762690495;  // 2 - sqrt(2)
inline constexpr double kToyM2 = 0.41421356237309505;  // sqrt(2) - 1
inline constexpr double kToyLambda = 0.58578643762690495;

/// Deterministic test randomness, independent of the library's stream use.
class TestRng {
 public:
  explicit TestRng(uint64_t seed) : s_(seed, 0xABCDEF, 0) {}
  double u01() { return s_.next_u01(); }
  double uniform(double lo, double hi) { return lo + (hi - lo) * u01(); }
  int uniform_int(int lo, int hi) {
    return lo + static_cast<int>(u01() * (hi - lo + 1)) % (hi - lo + 1);
  }

 private:
  RngStream s_;
};

/// Random strictly positive birth-death model with N states.
inline BirthDeathModel random_bd_model(TestRng& rng, int n) {
  std::vector<double> b(static_cast<size_t>(n)), d(static_cast<size_t>(n));
  for (int j = 0; j < n; ++j) {
    b[static_cast<size_t>(j)] = (j == n - 1) ? 0.0 : rng.uniform(0.1, 3.0);
    d[static_cast<size_t>(j)] = rng.uniform(0.1, 3.0);
  }
  return BirthDeathModel::create(std::move(b), std::move(d));
}

/// Random probability distribution on {1..n} with full support.
inline ProbDist random_prob(TestRng& rng, int n) {
  std::vector<double> w(static_cast<size_t>(n));
  for (double& x : w) x = -std::log(rng.u01());
  return ProbDist::normalized(std::move(w));
}

}  // namespace qsd::test
