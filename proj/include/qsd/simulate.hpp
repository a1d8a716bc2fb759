#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "qsd/bd_model.hpp"
#include "qsd/generator.hpp"
#include "qsd/prob.hpp"
#include "qsd/rng.hpp"

namespace qsd {

struct SimConfig {
  uint64_t seed = 42;
  long replicates = 1;
  double t_max = 1e9;       // hard horizon guarding unbounded runs
  uint64_t stream_id = 0;   // substream namespace within the seed
  double burn_in_frac = 0.10;  // occupation estimates discard this prefix
  int threads = 0;          // 0 = hardware concurrency (capped by replicates)
};

enum class EstimateKind { Probability, MeanTime, TVDistance };

struct SimEstimate {
  double value = 0.0;
  double std_error = 0.0;
  long n = 0;
  EstimateKind kind = EstimateKind::Probability;
  long censored = 0;  // replicates cut at the horizon (or trapped at 0)
};

struct PathSample {
  int hit_state = 0;
  double elapsed = 0.0;
  bool censored = false;
};

/// Runs the chain from `start` until first entry into stop_set, with the
/// return-time convention: a start inside stop_set must first jump away
/// (landing inside stop_set counts as the hit).  Paths trapped at the
/// cemetery when 0 is not a stop state, or exceeding t_max, throw
/// HorizonExceeded.
PathSample sample_until(const Generator& gen, int start,
                        const std::vector<int>& stop_set, RngStream& rng,
                        double t_max = 1e9);

/// Binomial estimate of P_k[hit s before 0] with Wilson standard error.
/// k == s returns 1 exactly with zero replicates consumed.
SimEstimate estimate_hit_prob(const Generator& gen, int k, int s,
                              const SimConfig& cfg);

/// Sample mean and standard error of tau_A from start k.  Censored paths are
/// excluded from the mean and counted; the censoring rate rides along.
SimEstimate estimate_mean_hitting_time(const Generator& gen, int k,
                                       const std::vector<int>& target_set,
                                       const SimConfig& cfg);

/// Time-weighted occupation frequencies of the returned process X^mu over
/// [burn_in, t_max], one long path per replicate, averaged across replicates.
/// Absorption events redraw the state from mu; a redraw landing on the
/// current state is no event.
ProbDist simulate_return_occupation(const Generator& gen, const ProbDist& mu,
                                    const SimConfig& cfg);

/// Empirical law of the absorbed process X(t) on C union {0}; absorbed paths
/// contribute to the cemetery mass.
SubProbDist estimate_law_at_t(const Generator& gen, int start_state, double t,
                              const SimConfig& cfg);
SubProbDist estimate_law_at_t(const Generator& gen, const ProbDist& start,
                              double t, const SimConfig& cfg);

/// P[X(t) in C] from a random start, as a binomial estimate.
SimEstimate estimate_survival(const Generator& gen, const ProbDist& start,
                              double t, const SimConfig& cfg);

/// Inputs of the long-time bound eta(t) = U t + K B sqrt(T/(p t))
/// + (2/e)^{p t / (16 T)}.  K is user-supplied (not computable here).
struct EtaInputs {
  double U, B, T, p;
  double K;
  double t;
};

double eta_bound(const EtaInputs& in);

/// Bracketed minimizer of t -> eta(t) (coarse log grid plus golden-section
/// refinement).
double eta_minimizer(double U, double B, double T, double p, double K);

struct LemmaSMeanCheck {
  std::vector<int> starts;
  std::vector<SimEstimate> estimates;  // E_r tau^mu_{s} per start
  double bound;                        // T/p
  bool holds;                          // all estimates <= bound + 3 sigma
};

/// Monte-Carlo check that E_r tau^mu_{{s}} <= T/p for the return process,
/// over a user sample of starting states.
LemmaSMeanCheck check_lemma_s_mean(const Generator& gen, const ProbDist& mu,
                                   int s, const BoundsReport& report,
                                   const std::vector<int>& starts,
                                   const SimConfig& cfg);

struct EstimateRow {
  std::string quantity;
  int start = 0;
  int target = 0;
  SimEstimate estimate;
  uint64_t seed = 0;
};

/// CSV dump: quantity,start,target,value,std_error,n,seed ('.' decimals, LF).
void write_estimates_csv(std::ostream& out, const std::vector<EstimateRow>& rows);

}  // namespace qsd
