#pragma once

#include <atomic>
#include <utility>
#include <vector>

#include "qsd/bd_model.hpp"
#include "qsd/generator.hpp"
#include "qsd/prob.hpp"

namespace qsd {

enum class QsdMethod { ReturnMapIteration, SpectralOracle };

struct QsdResult {
  ProbDist m;
  double lambda_m;  // exit rate from m, sum_i m(i) q_{i0}
  QsdMethod method;
};

struct IterationTrace {
  std::vector<ProbDist> iterates;
  std::vector<double> residuals;  // d_TV between successive iterates
  bool converged = false;
  double contraction_observed = 0.0;  // max ratio of successive residuals
};

/// Stationary distribution of the returned process: pi^mu is proportional to
/// mu (-Q_C)^{-1}, obtained from one transposed linear solve against the
/// original absorbing generator and an L1 normalization.  Components down to
/// -1e-12 are clamped to zero before renormalizing.
ProbDist pi_mu(const Generator& gen, const ProbDist& mu);

/// Picard iteration of mu -> pi^mu until d_TV drops below tol or max_iter
/// sweeps (0 means 10*N).  Convergence is reported honestly via the trace;
/// lambda_m is the exit rate of the final iterate.  The optional cancel flag
/// stops the loop cooperatively.
std::pair<QsdResult, IterationTrace> iterate_return_map(
    const Generator& gen, const ProbDist& mu0, double tol, int max_iter = 0,
    const std::atomic<bool>* cancel = nullptr);

/// Independent spectral route: left power iteration on the uniformized
/// skeleton P_h = I + h Q_C (no linear solves shared with pi_mu), with
/// lambda_m = (1 - rho_h)/h from the converged eigenvalue.  The returned
/// eigenpair is residual-checked; failure throws NotConverged.  h = 0 picks
/// 0.5/max_i q_i; h >= 1/max_i q_i throws StepTooLarge.
QsdResult qsd_spectral_oracle(const Generator& gen, double h_step = 0.0,
                              double tol = 1e-13, long max_iter = 50'000'000,
                              const std::atomic<bool>* cancel = nullptr);

/// sum_i dist(i) q_{i0}, the rate of leaving C from dist.
double exit_rate(const Generator& gen, const ProbDist& dist);

/// U for arbitrary absorbing generators:
/// sum over exit states k of q_{k0} / (q_k E_k tau_{{k,0}}).
double u_general(const Generator& gen);

struct SteinSolution {
  std::vector<double> f;  // test function on C
  std::vector<double> h;  // solution with h(gauge_state) = 0
  double pi_f;            // pi^mu(f)
  int gauge_state;
  double dynkin_residual;  // |pi^mu(Q^mu h)|, checked <= 1e-9 before return
};

/// Solves (Q^mu h)(j) = f(j) - pi^mu(f) with the gauge h(s) = 0 at the given
/// state (the certificate state, or 1).  The one-dimensional null space of
/// Q^mu is removed by the gauge; the Dynkin identity pi^mu(Q^mu h) = 0 is
/// verified to 1e-9 before returning.
SteinSolution stein_solve(const Generator& gen, const ProbDist& mu,
                          const std::vector<double>& f, int gauge_state = 1);

struct ContractionCheck {
  double lhs;        // ||pi^nu - pi^mu||_TV = 2 d_TV
  double rhs;        // contraction * ||nu - mu||_TV
  double rhs_sharp;  // diagnostic: (2T/p) sum_i pi^mu(i) q_{i0} * ||nu - mu||_TV
  bool holds;        // lhs <= rhs + 1e-10
  bool asserted;     // false when the certificate is invalid
};

/// Checks ||pi^nu - pi^mu||_TV <= (2UT/p) ||nu - mu||_TV against a
/// certificate from the same model; meaningful only when certificate_valid.
ContractionCheck check_contraction(const Generator& gen, const ProbDist& mu,
                                   const ProbDist& nu, const BoundsReport& report);

}  // namespace qsd
