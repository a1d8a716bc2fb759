#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "qsd/errors.hpp"
#include "qsd/prob.hpp"

namespace qsd {

struct RateTriple {
  int from;     // in 1..N
  int to;       // in 0..N, to != from
  double rate;  // >= 0, units 1/time
};

struct RateEntry {
  int target;   // 0..N
  double rate;  // > 0
};

/// Conservative rate matrix of a pure-jump chain on C = {1..N} with cemetery
/// state 0.  Rows are sparse, sorted by target, diagonal-free; the exit rate
/// q_i and the absorption rate q_{i0} are cached per state.  Immutable.
class Generator {
 public:
  /// Factory for the absorbing chains under study.  Enforces: finite
  /// nonnegative rates, no self-loops, q_i > 0 for every i in C, and at
  /// least one state with q_{i0} > 0.  Duplicate (i,j) entries are summed;
  /// zero-rate entries are dropped.
  static Generator validate(const std::vector<RateTriple>& triples, int n_states);

  /// Factory for derived conservative generators (return processes), which
  /// legitimately have no absorption and may contain zero-exit states.
  static Generator conservative(const std::vector<RateTriple>& triples, int n_states);

  int n_states() const { return n_; }
  std::span<const RateEntry> row(int i) const {
    return {entries_.data() + offsets_[static_cast<size_t>(i) - 1],
            entries_.data() + offsets_[static_cast<size_t>(i)]};
  }
  double exit_rate(int i) const { return exit_[static_cast<size_t>(i) - 1]; }
  double absorption_rate(int i) const { return absorb_[static_cast<size_t>(i) - 1]; }
  double total_absorption() const;
  double max_exit_rate() const { return max_exit_; }
  /// True when every within-C target satisfies |i - j| <= 1, so that Q_C is
  /// tridiagonal and linear solves can take the O(N) path.
  bool tridiagonal() const { return tridiagonal_; }

 private:
  Generator() = default;
  static Generator build(const std::vector<RateTriple>& triples, int n_states,
                         bool require_absorption, bool require_exit);

  int n_ = 0;
  std::vector<size_t> offsets_;      // n_+1 row offsets into entries_
  std::vector<RateEntry> entries_;   // sorted by target within each row
  std::vector<double> exit_;         // q_i
  std::vector<double> absorb_;       // q_{i0}
  double max_exit_ = 0.0;
  bool tridiagonal_ = true;
};

/// Target/avoid pair for first-passage questions; both sets live in
/// C union {0}, target nonempty and disjoint from avoid.
struct HittingSpec {
  std::vector<int> target;
  std::vector<int> avoid;
};

/// Generator of the returned process: q^mu_{ij} = q_{ij} + q_{i0} mu_j for
/// j != i; the mass q_{i0} mu_i returning to the current state is dropped,
/// so q^mu_i = q_i - q_{i0} mu_i and the result has no absorption.
Generator return_generator(const Generator& gen, const ProbDist& mu);

/// P_k[hit target before avoid] for every start k in C, by linear solve with
/// boundary values 1 on target and 0 on avoid (state 0, when listed in
/// neither set, is an implicit trap contributing 0).  Entries in [0,1].
std::vector<double> hit_probability(const Generator& gen, const HittingSpec& spec);

/// E_k[tau_A] for every k in C, where tau_A is the first entry into A with
/// the return-time convention for starts inside A: one jump out of k plus
/// the expected re-entry time (so A = C union {0} gives the holding time
/// 1/q_k).  Starts whose paths can reach an A-free trap (state 0 when
/// 0 is not in A) get +infinity.  Throws SingularSystem when some state can
/// reach neither A nor the cemetery.
std::vector<double> mean_hitting_time(const Generator& gen,
                                      const std::vector<int>& target_set);

/// Plain-text interchange: header `n=<N>`, one `i j rate` triple per line,
/// `#` comments.  Values are parsed as binary64.
Generator read_generator(std::istream& in);
void write_generator(std::ostream& out, const Generator& gen);

}  // namespace qsd
