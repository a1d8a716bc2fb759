#include "qsd/simulate.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <functional>
#include <ostream>
#include <thread>

#include "qsd/numerics.hpp"

namespace qsd {

namespace {

constexpr long kChunk = 64;  // replicates per reduction chunk (index-ordered)

void check_cfg(const SimConfig& cfg) {
  if (cfg.replicates < 1)
    throw QsdError(ErrKind::InvalidParams, "replicates must be >= 1");
  if (!(cfg.t_max > 0.0)) throw QsdError(ErrKind::InvalidParams, "t_max must be positive");
  if (cfg.burn_in_frac < 0.0 || cfg.burn_in_frac >= 1.0)
    throw QsdError(ErrKind::InvalidParams, "burn-in fraction must lie in [0,1)");
}

int resolve_threads(const SimConfig& cfg, long chunks) {
  int t = cfg.threads;
  if (t <= 0) t = static_cast<int>(std::thread::hardware_concurrency());
  if (t < 1) t = 1;
  return static_cast<int>(std::min<long>(t, chunks));
}

/// Runs body(rep) for rep in [0, reps), scheduling whole chunks; every
/// replicate writes only to its own slot, so the merge order is fixed by
/// index and results do not depend on the thread count.
template <typename Body>
void for_each_replicate(long reps, const SimConfig& cfg, Body&& body) {
  long chunks = (reps + kChunk - 1) / kChunk;
  int threads = resolve_threads(cfg, chunks);
  if (threads == 1) {
    for (long r = 0; r < reps; ++r) body(r);
    return;
  }
  std::atomic<long> next{0};
  auto worker = [&]() {
    for (;;) {
      long c = next.fetch_add(1);
      if (c >= chunks) return;
      long lo = c * kChunk, hi = std::min(reps, lo + kChunk);
      for (long r = lo; r < hi; ++r) body(r);
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(threads));
  for (int i = 0; i < threads; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
}

int sample_jump(const Generator& gen, int state, RngStream& rng) {
  double u = rng.next_u01() * gen.exit_rate(state);
  auto row = gen.row(state);
  double acc = 0.0;
  for (const RateEntry& e : row) {
    acc += e.rate;
    if (u <= acc) return e.target;
  }
  return row.back().target;  // guard against rounding at u ~ q_i
}

std::vector<double> cdf_of(const ProbDist& mu) {
  std::vector<double> cdf(mu.mass().size());
  double acc = 0.0;
  for (size_t i = 0; i < cdf.size(); ++i) {
    acc += mu.mass()[i];
    cdf[i] = acc;
  }
  cdf.back() = 1.0;
  return cdf;
}

int sample_state(const std::vector<double>& cdf, RngStream& rng) {
  double u = rng.next_u01();
  auto it = std::lower_bound(cdf.begin(), cdf.end(), u);
  return static_cast<int>(it - cdf.begin()) + 1;
}

double wilson_half_width(long successes, long n) {
  if (n <= 0) return 0.0;
  double nn = static_cast<double>(n);
  double p = static_cast<double>(successes) / nn;
  double denom = 1.0 + 1.0 / nn;
  return std::sqrt(p * (1.0 - p) / nn + 1.0 / (4.0 * nn * nn)) / denom;
}

SimEstimate mean_and_se(const std::vector<double>& values,
                        const std::vector<char>& censored_flags) {
  SimEstimate est;
  est.kind = EstimateKind::MeanTime;
  KahanSum sum;
  long n_ok = 0;
  for (size_t i = 0; i < values.size(); ++i) {
    if (censored_flags[i]) {
      ++est.censored;
      continue;
    }
    sum.add(values[i]);
    ++n_ok;
  }
  est.n = n_ok;
  if (n_ok == 0) return est;
  double mean = sum.value() / static_cast<double>(n_ok);
  KahanSum sq;
  for (size_t i = 0; i < values.size(); ++i)
    if (!censored_flags[i]) sq.add((values[i] - mean) * (values[i] - mean));
  est.value = mean;
  if (n_ok > 1)
    est.std_error = std::sqrt(sq.value() / (static_cast<double>(n_ok) - 1.0) /
                              static_cast<double>(n_ok));
  return est;
}

struct StopMask {
  std::vector<char> mask;  // indexed by state 0..N
  explicit StopMask(const Generator& gen, const std::vector<int>& stop_set) {
    mask.assign(static_cast<size_t>(gen.n_states()) + 1, 0);
    if (stop_set.empty())
      throw QsdError(ErrKind::InvalidParams, "empty stop set");
    for (int k : stop_set) {
      if (k < 0 || k > gen.n_states())
        throw QsdError(ErrKind::IndexOutOfRange,
                       "stop state " + std::to_string(k) + " outside 0..N");
      mask[static_cast<size_t>(k)] = 1;
    }
  }
  bool contains(int k) const { return mask[static_cast<size_t>(k)] != 0; }
};

/// First passage of the absorbing chain X into the stop set, with the
/// leave-first convention for starts inside it.
PathSample run_until(const Generator& gen, int start, const StopMask& stop,
                     RngStream& rng, double t_max) {
  PathSample out;
  int state = start;
  double t = 0.0;
  for (;;) {
    t += rng.next_exponential(gen.exit_rate(state));
    if (t > t_max) {
      out.elapsed = t_max;
      out.censored = true;
      return out;
    }
    int j = sample_jump(gen, state, rng);
    if (stop.contains(j)) {
      out.hit_state = j;
      out.elapsed = t;
      return out;
    }
    if (j == 0) {  // trapped at the cemetery, the stop set is unreachable
      out.elapsed = t;
      out.censored = true;
      return out;
    }
    state = j;
  }
}

/// Same for the returned process X^mu: absorption redraws the state from mu,
/// and a redraw landing on the current state is no event.
PathSample run_until_return(const Generator& gen, const std::vector<double>& mu_cdf,
                            int start, const StopMask& stop, RngStream& rng,
                            double t_max) {
  PathSample out;
  int state = start;
  double t = 0.0;
  for (;;) {
    t += rng.next_exponential(gen.exit_rate(state));
    if (t > t_max) {
      out.elapsed = t_max;
      out.censored = true;
      return out;
    }
    int j = sample_jump(gen, state, rng);
    if (j == 0) {
      j = sample_state(mu_cdf, rng);
      if (j == state) continue;  // returning to the current state is no event
    }
    if (stop.contains(j)) {
      out.hit_state = j;
      out.elapsed = t;
      return out;
    }
    state = j;
  }
}

}  // namespace

PathSample sample_until(const Generator& gen, int start,
                        const std::vector<int>& stop_set, RngStream& rng,
                        double t_max) {
  if (start < 1 || start > gen.n_states())
    throw QsdError(ErrKind::IndexOutOfRange, "start state outside C");
  StopMask stop(gen, stop_set);
  PathSample s = run_until(gen, start, stop, rng, t_max);
  if (s.censored)
    throw QsdError(ErrKind::HorizonExceeded,
                   "path exceeded t_max = " + std::to_string(t_max) +
                       " without entering the stop set");
  return s;
}

SimEstimate estimate_hit_prob(const Generator& gen, int k, int s,
                              const SimConfig& cfg) {
  check_cfg(cfg);
  if (k < 1 || k > gen.n_states() || s < 1 || s > gen.n_states())
    throw QsdError(ErrKind::IndexOutOfRange, "states outside C");
  SimEstimate est;
  est.kind = EstimateKind::Probability;
  if (k == s) {  // definitional boundary, no replicates consumed
    est.value = 1.0;
    return est;
  }
  StopMask stop(gen, {s, 0});
  long reps = cfg.replicates;
  std::vector<char> hit(static_cast<size_t>(reps), 0), cens(static_cast<size_t>(reps), 0);
  for_each_replicate(reps, cfg, [&](long r) {
    RngStream rng(cfg.seed, cfg.stream_id, static_cast<uint64_t>(r));
    PathSample p = run_until(gen, k, stop, rng, cfg.t_max);
    if (p.censored)
      cens[static_cast<size_t>(r)] = 1;
    else
      hit[static_cast<size_t>(r)] = (p.hit_state == s);
  });
  long successes = 0, n_ok = 0;
  for (long r = 0; r < reps; ++r) {
    if (cens[static_cast<size_t>(r)]) {
      ++est.censored;
      continue;
    }
    ++n_ok;
    successes += hit[static_cast<size_t>(r)];
  }
  est.n = n_ok;
  est.value = n_ok > 0 ? static_cast<double>(successes) / static_cast<double>(n_ok) : 0.0;
  est.std_error = wilson_half_width(successes, n_ok);
  return est;
}

SimEstimate estimate_mean_hitting_time(const Generator& gen, int k,
                                       const std::vector<int>& target_set,
                                       const SimConfig& cfg) {
  check_cfg(cfg);
  if (k < 1 || k > gen.n_states())
    throw QsdError(ErrKind::IndexOutOfRange, "start state outside C");
  StopMask stop(gen, target_set);
  long reps = cfg.replicates;
  std::vector<double> elapsed(static_cast<size_t>(reps), 0.0);
  std::vector<char> cens(static_cast<size_t>(reps), 0);
  for_each_replicate(reps, cfg, [&](long r) {
    RngStream rng(cfg.seed, cfg.stream_id, static_cast<uint64_t>(r));
    PathSample p = run_until(gen, k, stop, rng, cfg.t_max);
    elapsed[static_cast<size_t>(r)] = p.elapsed;
    cens[static_cast<size_t>(r)] = p.censored;
  });
  return mean_and_se(elapsed, cens);
}

ProbDist simulate_return_occupation(const Generator& gen, const ProbDist& mu,
                                    const SimConfig& cfg) {
  check_cfg(cfg);
  if (mu.size() != gen.n_states())
    throw QsdError(ErrKind::DimensionMismatch, "mu/generator size mismatch");
  int n = gen.n_states();
  auto mu_cdf = cdf_of(mu);
  double burn = cfg.burn_in_frac * cfg.t_max;

  long reps = cfg.replicates;
  long chunks = (reps + kChunk - 1) / kChunk;
  std::vector<std::vector<double>> partial(
      static_cast<size_t>(chunks), std::vector<double>(static_cast<size_t>(n), 0.0));

  for_each_replicate(reps, cfg, [&](long r) {
    RngStream rng(cfg.seed, cfg.stream_id, static_cast<uint64_t>(r));
    std::vector<double>& occ = partial[static_cast<size_t>(r / kChunk)];
    int state = sample_state(mu_cdf, rng);
    double t = 0.0;
    while (t < cfg.t_max) {
      double dt = rng.next_exponential(gen.exit_rate(state));
      double t1 = std::min(t + dt, cfg.t_max);
      double overlap = std::min(t1, cfg.t_max) - std::max(t, burn);
      if (overlap > 0.0) occ[static_cast<size_t>(state) - 1] += overlap;
      t += dt;
      if (t >= cfg.t_max) break;
      int j = sample_jump(gen, state, rng);
      if (j == 0) {
        j = sample_state(mu_cdf, rng);
        if (j == state) continue;
      }
      state = j;
    }
  });

  std::vector<double> total(static_cast<size_t>(n), 0.0);
  for (const auto& part : partial)
    for (size_t i = 0; i < part.size(); ++i) total[i] += part[i];
  return ProbDist::normalized(std::move(total));
}

namespace {

std::vector<long> law_counts(const Generator& gen, const std::vector<double>* start_cdf,
                             int start_state, double t, const SimConfig& cfg) {
  check_cfg(cfg);
  if (t < 0.0 || t > cfg.t_max)
    throw QsdError(ErrKind::InvalidParams, "need 0 <= t <= t_max");
  long reps = cfg.replicates;
  std::vector<int> at_t(static_cast<size_t>(reps), 0);
  for_each_replicate(reps, cfg, [&](long r) {
    RngStream rng(cfg.seed, cfg.stream_id, static_cast<uint64_t>(r));
    int state = start_cdf ? sample_state(*start_cdf, rng) : start_state;
    double now = 0.0;
    while (state != 0) {
      now += rng.next_exponential(gen.exit_rate(state));
      if (now > t) break;
      state = sample_jump(gen, state, rng);
    }
    at_t[static_cast<size_t>(r)] = state;
  });
  std::vector<long> counts(static_cast<size_t>(gen.n_states()) + 1, 0);
  for (long r = 0; r < reps; ++r) ++counts[static_cast<size_t>(at_t[static_cast<size_t>(r)])];
  return counts;
}

SubProbDist counts_to_law(const std::vector<long>& counts, long reps) {
  std::vector<double> mass(counts.size() - 1);
  for (size_t i = 1; i < counts.size(); ++i)
    mass[i - 1] = static_cast<double>(counts[i]) / static_cast<double>(reps);
  return SubProbDist(static_cast<double>(counts[0]) / static_cast<double>(reps),
                     std::move(mass));
}

}  // namespace

SubProbDist estimate_law_at_t(const Generator& gen, int start_state, double t,
                              const SimConfig& cfg) {
  if (start_state < 1 || start_state > gen.n_states())
    throw QsdError(ErrKind::IndexOutOfRange, "start state outside C");
  return counts_to_law(law_counts(gen, nullptr, start_state, t, cfg), cfg.replicates);
}

SubProbDist estimate_law_at_t(const Generator& gen, const ProbDist& start,
                              double t, const SimConfig& cfg) {
  if (start.size() != gen.n_states())
    throw QsdError(ErrKind::DimensionMismatch, "start/generator size mismatch");
  auto cdf = cdf_of(start);
  return counts_to_law(law_counts(gen, &cdf, 0, t, cfg), cfg.replicates);
}

SimEstimate estimate_survival(const Generator& gen, const ProbDist& start,
                              double t, const SimConfig& cfg) {
  if (start.size() != gen.n_states())
    throw QsdError(ErrKind::DimensionMismatch, "start/generator size mismatch");
  auto cdf = cdf_of(start);
  auto counts = law_counts(gen, &cdf, 0, t, cfg);
  long reps = cfg.replicates;
  long surv = reps - counts[0];
  SimEstimate est;
  est.kind = EstimateKind::Probability;
  est.n = reps;
  est.value = static_cast<double>(surv) / static_cast<double>(reps);
  est.std_error = wilson_half_width(surv, reps);
  return est;
}

double eta_bound(const EtaInputs& in) {
  return in.U * in.t + in.K * in.B * std::sqrt(in.T / (in.p * in.t)) +
         std::pow(2.0 / std::exp(1.0), in.p * in.t / (16.0 * in.T));
}

double eta_minimizer(double U, double B, double T, double p, double K) {
  if (!(T > 0.0) || !(p > 0.0))
    throw QsdError(ErrKind::InvalidParams, "need positive T and p");
  auto eta = [&](double t) { return eta_bound({U, B, T, p, K, t}); };

  double lo = 1e-6 * T / p;
  double hi = U > 0.0 ? std::max(10.0 / U, 1e3 * T / p) : 1e12 * T / p;
  int grid = 400;
  double best_t = lo, best_v = eta(lo);
  double lf = std::log(lo), step = (std::log(hi) - lf) / grid;
  for (int i = 0; i <= grid; ++i) {
    double t = std::exp(lf + i * step);
    double v = eta(t);
    if (v < best_v) {
      best_v = v;
      best_t = t;
    }
  }
  // golden-section refinement around the grid minimum
  double a = best_t / std::exp(step), b = best_t * std::exp(step);
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = b - phi * (b - a), x2 = a + phi * (b - a);
  double f1 = eta(x1), f2 = eta(x2);
  for (int i = 0; i < 200 && (b - a) > 1e-12 * b; ++i) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - phi * (b - a);
      f1 = eta(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + phi * (b - a);
      f2 = eta(x2);
    }
  }
  return 0.5 * (a + b);
}

LemmaSMeanCheck check_lemma_s_mean(const Generator& gen, const ProbDist& mu,
                                   int s, const BoundsReport& report,
                                   const std::vector<int>& starts,
                                   const SimConfig& cfg) {
  check_cfg(cfg);
  if (mu.size() != gen.n_states())
    throw QsdError(ErrKind::DimensionMismatch, "mu/generator size mismatch");
  if (s < 1 || s > gen.n_states())
    throw QsdError(ErrKind::IndexOutOfRange, "s outside C");
  auto mu_cdf = cdf_of(mu);
  StopMask stop(gen, {s});

  LemmaSMeanCheck out;
  out.starts = starts;
  out.bound = report.T / report.p;
  out.holds = true;
  long reps = cfg.replicates;
  for (size_t si = 0; si < starts.size(); ++si) {
    int r0 = starts[si];
    if (r0 < 1 || r0 > gen.n_states())
      throw QsdError(ErrKind::IndexOutOfRange, "start state outside C");
    std::vector<double> elapsed(static_cast<size_t>(reps), 0.0);
    std::vector<char> cens(static_cast<size_t>(reps), 0);
    SimConfig sub = cfg;
    sub.stream_id = cfg.stream_id + 1 + si;  // independent substream per start
    for_each_replicate(reps, sub, [&](long r) {
      RngStream rng(sub.seed, sub.stream_id, static_cast<uint64_t>(r));
      PathSample p = run_until_return(gen, mu_cdf, r0, stop, rng, sub.t_max);
      elapsed[static_cast<size_t>(r)] = p.elapsed;
      cens[static_cast<size_t>(r)] = p.censored;
    });
    SimEstimate est = mean_and_se(elapsed, cens);
    out.estimates.push_back(est);
    if (!(est.value <= out.bound + 3.0 * est.std_error)) out.holds = false;
  }
  return out;
}

void write_estimates_csv(std::ostream& out, const std::vector<EstimateRow>& rows) {
  out << "quantity,start,target,value,std_error,n,seed\n";
  char buf[64];
  for (const EstimateRow& r : rows) {
    out << r.quantity << ',' << r.start << ',' << r.target << ',';
    std::snprintf(buf, sizeof buf, "%.12g", r.estimate.value);
    out << buf << ',';
    std::snprintf(buf, sizeof buf, "%.12g", r.estimate.std_error);
    out << buf << ',' << r.estimate.n << ',' << r.seed << "\n";
  }
}

}  // namespace qsd
