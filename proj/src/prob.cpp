#include "qsd/prob.hpp"

#include <cmath>
#include <string>

namespace qsd {

namespace {

void check_entries(const std::vector<double>& mass, double floor) {
  if (mass.empty())
    throw QsdError(ErrKind::InvalidDistribution, "empty mass vector");
  for (size_t i = 0; i < mass.size(); ++i) {
    if (!std::isfinite(mass[i]) || mass[i] < floor)
      throw QsdError(ErrKind::InvalidDistribution,
                     "negative mass " + std::to_string(mass[i]) + " at state " +
                         std::to_string(i + 1));
  }
}

double mass_sum(const std::vector<double>& mass, double extra = 0.0) {
  KahanSum acc;
  acc.add(extra);
  for (double x : mass) acc.add(x);
  return acc.value();
}

}  // namespace

ProbDist::ProbDist(std::vector<double> mass) : mass_(std::move(mass)) {
  check_entries(mass_, 0.0);
  double s = mass_sum(mass_);
  if (std::abs(s - 1.0) > kProbTol)
    throw QsdError(ErrKind::InvalidDistribution,
                   "mass sums to " + std::to_string(s) + ", not 1");
  for (double& x : mass_) x /= s;
}

ProbDist ProbDist::normalized(std::vector<double> mass, double clamp_tol) {
  check_entries(mass, -clamp_tol);
  for (double& x : mass)
    if (x < 0.0) x = 0.0;
  double s = mass_sum(mass);
  if (!(s > 0.0))
    throw QsdError(ErrKind::InvalidDistribution, "zero total mass");
  for (double& x : mass) x /= s;
  return ProbDist(std::move(mass), raw_tag{});
}

ProbDist ProbDist::delta(int state, int n) {
  if (state < 1 || state > n)
    throw QsdError(ErrKind::IndexOutOfRange,
                   "delta state " + std::to_string(state) + " outside 1.." +
                       std::to_string(n));
  std::vector<double> mass(static_cast<size_t>(n), 0.0);
  mass[static_cast<size_t>(state) - 1] = 1.0;
  return ProbDist(std::move(mass), raw_tag{});
}

ProbDist ProbDist::uniform(int n) {
  if (n < 1) throw QsdError(ErrKind::InvalidDistribution, "uniform on empty C");
  std::vector<double> mass(static_cast<size_t>(n), 1.0 / n);
  return ProbDist(std::move(mass), raw_tag{});
}

SubProbDist::SubProbDist(double mass0, std::vector<double> mass)
    : mass0_(mass0), mass_(std::move(mass)) {
  if (!std::isfinite(mass0_) || mass0_ < 0.0)
    throw QsdError(ErrKind::InvalidDistribution, "negative cemetery mass");
  check_entries(mass_, 0.0);
  double s = mass_sum(mass_, mass0_);
  if (std::abs(s - 1.0) > kProbTol)
    throw QsdError(ErrKind::InvalidDistribution,
                   "mass sums to " + std::to_string(s) + ", not 1");
  mass0_ /= s;
  for (double& x : mass_) x /= s;
}

SubProbDist SubProbDist::extend(const ProbDist& f) {
  return SubProbDist(0.0, f.mass());
}

double tv_distance(const ProbDist& f, const ProbDist& g) {
  if (f.size() != g.size())
    throw QsdError(ErrKind::DimensionMismatch,
                   "tv_distance over supports of size " +
                       std::to_string(f.size()) + " and " +
                       std::to_string(g.size()));
  KahanSum acc;
  for (int i = 0; i < f.size(); ++i)
    acc.add(std::abs(f.mass()[static_cast<size_t>(i)] - g.mass()[static_cast<size_t>(i)]));
  return 0.5 * acc.value();
}

double tv_distance(const SubProbDist& f, const SubProbDist& g) {
  if (f.size() != g.size())
    throw QsdError(ErrKind::DimensionMismatch,
                   "tv_distance over supports of size " +
                       std::to_string(f.size()) + " and " +
                       std::to_string(g.size()));
  KahanSum acc;
  acc.add(std::abs(f.mass0() - g.mass0()));
  for (int i = 0; i < f.size(); ++i)
    acc.add(std::abs(f.mass()[static_cast<size_t>(i)] - g.mass()[static_cast<size_t>(i)]));
  return 0.5 * acc.value();
}

}  // namespace qsd
