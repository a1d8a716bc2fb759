#pragma once

#include <string>
#include <vector>

#include "qsd/generator.hpp"
#include "qsd/prob.hpp"

namespace qsd {

enum class Truncation { ExactFinite, TruncatedInfinite };

/// Tail certification attached to a truncated representation of a
/// conceptually infinite chain.  All alpha quantities live in log space
/// (alpha_1 = 1 sets the scale and the weights span thousands of orders of
/// magnitude for logistic models with large area).
struct TruncationNote {
  Truncation kind = Truncation::ExactFinite;
  /// log of an upper bound on sum_{j>N} alpha_j (-inf when the tail is
  /// exactly zero, +inf when no geometric domination holds at the edge).
  double log_tail_mass_bound = -kInf;
  /// sup_{j>=N} alpha_{j+1}/alpha_j of the untruncated model.
  double tail_alpha_ratio = 0.0;
  /// upper bound on sum_{j>N} 1/d_j of the untruncated model.
  double d_tail_sum_bound = 0.0;
};

/// Birth-death specialization on {1..N} with absorption 1 -> 0 at rate d_1.
/// b_j > 0 for j < N, b_N = 0, d_j > 0.
class BirthDeathModel {
 public:
  static BirthDeathModel create(std::vector<double> b, std::vector<double> d,
                                TruncationNote note = {});

  int n_states() const { return static_cast<int>(b_.size()); }
  double birth(int j) const { return b_[static_cast<size_t>(j) - 1]; }
  double death(int j) const { return d_[static_cast<size_t>(j) - 1]; }
  double exit(int j) const { return birth(j) + death(j); }
  const std::vector<double>& births() const { return b_; }
  const std::vector<double>& deaths() const { return d_; }
  const TruncationNote& truncation() const { return note_; }

 private:
  BirthDeathModel(std::vector<double> b, std::vector<double> d, TruncationNote note)
      : b_(std::move(b)), d_(std::move(d)), note_(note) {}
  std::vector<double> b_, d_;
  TruncationNote note_;
};

/// Stochastic logistic model: per-capita birth rate b, natural death rate d,
/// crowding death rate e per unit density, area A.  Transition rates
/// b_i = b*i and d_i = d*i + e*i^2/A, truncated at N.
struct LogisticParams {
  double b, d, e, A;
  int N;
};

/// SIS epidemic rates on {0..N}: b_i = lambda*i*(1 - i/N), d_i = mu*i.
struct SISParams {
  double lambda, mu;
  int N;
};

BirthDeathModel make_logistic(const LogisticParams& p,
                              Truncation policy = Truncation::TruncatedInfinite);
BirthDeathModel make_sis(const SISParams& p);

/// alpha_1 = 1, alpha_j = (b_1...b_{j-1})/(d_2...d_j), held as logs;
/// log_alpha_plus = log sum_j alpha_j over the stored states.
struct AlphaWeights {
  std::vector<double> log_alpha;  // [j-1] = log alpha_j
  double log_alpha_plus = 0.0;
};

AlphaWeights alpha_weights(const BirthDeathModel& m);

/// Stationary law of the return process with mu = delta_1: alpha_j/alpha_+.
ProbDist return_dist_delta1(const BirthDeathModel& m);

enum class SChoiceFlag { Ok, MonotoneWarning, NonMonotoneRatio };

struct SChoice {
  int s;
  SChoiceFlag flag;
};

/// The crossing index with b_s/d_s >= 1 > b_{s+1}/d_{s+1}.  Returns s = 1
/// with MonotoneWarning when b_1/d_1 < 1; falls back to argmax_j alpha_j
/// with NonMonotoneRatio when the ratios b_j/d_j are not non-increasing.
SChoice choose_s(const BirthDeathModel& m);

/// r_k = sigma_k/sigma_s for k <= s and 1 for k > s, where
/// sigma_k = sum_{j<=k} 1/(d_j alpha_j); this is P_k[hit s before 0].
std::vector<double> hit_prob_closed_form(const BirthDeathModel& m, int s);

/// p = r_1 = 1/(d_1 sigma_s), the uniform lower bound on hitting s before 0.
double p_bound(const BirthDeathModel& m, int s);

struct TBounds {
  double T1;  // covers starts 1..s, including the return time at s
  double T2;  // exact series sup_{k>s} E_k tau_{s,0} (plus certified tail)
  double T;   // max(T1, T2)
};

/// Upper bounds on E_k tau_{{s,0}} uniform over starts.  The climb part of
/// T1 is sum_{i=1}^{s-1} (1/(b_i alpha_i)) sum_{j=1}^{i} alpha_j; the start
/// k = s is covered by one jump out of s plus the exact downhill series and
/// the climb bound from s-1.  Throws DSeriesDivergent when a truncated
/// infinite model has no geometric tail certificate.
TBounds t_bounds(const BirthDeathModel& m, int s);

/// U = d_1/alpha_+ (equivalently d_1/((b_1+d_1) E_1 tau_{{1,0}})).
/// Throws DivergentAlphaSum when a truncated infinite model has no finite
/// tail bound for alpha_+.
double u_exact(const BirthDeathModel& m);

/// The certificate bundle for the return-map contraction.
struct BoundsReport {
  int s = 0;
  SChoiceFlag s_flag = SChoiceFlag::Ok;
  double p = 0.0;
  double T1 = 0.0;
  double T2 = 0.0;
  double T = 0.0;
  double U = 0.0;            // exp(log_U); may underflow to 0 for huge models
  double log_u = -kInf;      // log U, always finite when defined
  double B = 0.0;            // T q_s / p with q_s = b_s + d_s
  double contraction = 0.0;  // 2 U T / p
  double log_contraction = -kInf;
  bool certificate_valid = false;
  std::string reason;  // nonempty when invalid
};

/// Assembles s, p, T, U, B and the contraction modulus 2UT/p; divergence of
/// the alpha sum or the D series is reported via certificate_valid = false
/// with a reason instead of throwing.
BoundsReport certificate(const BirthDeathModel& m);

/// Closed-form estimates under increasing d_j, decreasing b_j/d_j and
/// b_1/d_1 > 1, with rho_1 = b_{s1}/d_{s1} > 1 > rho_2 = b_{s2}/d_{s2}:
///   p  >= (rho_1 - 1)/rho_1 * [1 + (s - s1) rho_1^{-s1}]^{-1}
///   U  <= d_{s1} (rho_1 - 1) rho_1^{-s1}
///   T2 <= {s2 - s + 1/(1 - rho_2)} sum_{j>s} 1/d_j
///   T1 <= {s - s1 + rho_1/(rho_1 - 1)} sum_{i<s} 1/b_i
struct QuickBounds {
  double p_lo, U_hi, T1_hi, T2_hi;
};

QuickBounds quick_bounds(const BirthDeathModel& m, int s1, int s2);

/// E_i tau_{{i-1}} = (1/(d_i alpha_i)) sum_{j>=i} alpha_j, 2 <= i <= N.
double mean_upcross_time(const BirthDeathModel& m, int i);

/// Tridiagonal generator with q_{i,i+1} = b_i, q_{i,i-1} = d_i (target 0
/// from state 1).
Generator to_generator(const BirthDeathModel& m);

}  // namespace qsd
