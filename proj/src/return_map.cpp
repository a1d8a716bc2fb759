#include "qsd/return_map.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>

#include "qsd/linalg.hpp"
#include "qsd/numerics.hpp"

namespace qsd {

namespace {

void require_absorbing_everywhere(const Generator& gen) {
  int n = gen.n_states();
  std::vector<std::vector<int>> preds(static_cast<size_t>(n));
  for (int i = 1; i <= n; ++i)
    for (const RateEntry& e : gen.row(i))
      if (e.target != 0) preds[static_cast<size_t>(e.target) - 1].push_back(i);

  std::vector<char> reach(static_cast<size_t>(n), 0);
  std::deque<int> queue;
  for (int k = 1; k <= n; ++k)
    if (gen.absorption_rate(k) > 0.0) {
      reach[static_cast<size_t>(k) - 1] = 1;
      queue.push_back(k);
    }
  while (!queue.empty()) {
    int j = queue.front();
    queue.pop_front();
    for (int i : preds[static_cast<size_t>(j) - 1]) {
      if (!reach[static_cast<size_t>(i) - 1]) {
        reach[static_cast<size_t>(i) - 1] = 1;
        queue.push_back(i);
      }
    }
  }
  for (int k = 1; k <= n; ++k)
    if (!reach[static_cast<size_t>(k) - 1])
      throw QsdError(ErrKind::SingularSystem,
                     "state " + std::to_string(k) +
                         " cannot reach the cemetery: Q_C is not invertible");
}

// One left multiply by P_h = I + h Q_C; returns the mass of w = v P_h.
double skeleton_multiply(const Generator& gen, double h,
                         const std::vector<double>& v, std::vector<double>& w) {
  int n = gen.n_states();
  for (int i = 1; i <= n; ++i)
    w[static_cast<size_t>(i) - 1] =
        v[static_cast<size_t>(i) - 1] * (1.0 - h * gen.exit_rate(i));
  for (int i = 1; i <= n; ++i) {
    double vi = v[static_cast<size_t>(i) - 1];
    if (vi == 0.0) continue;
    for (const RateEntry& e : gen.row(i))
      if (e.target != 0) w[static_cast<size_t>(e.target) - 1] += h * vi * e.rate;
  }
  KahanSum mass;
  for (double x : w) mass.add(x);
  return mass.value();
}

double tv_raw(const std::vector<double>& a, const std::vector<double>& b) {
  KahanSum acc;
  for (size_t i = 0; i < a.size(); ++i) acc.add(std::abs(a[i] - b[i]));
  return 0.5 * acc.value();
}

}  // namespace

ProbDist pi_mu(const Generator& gen, const ProbDist& mu) {
  int n = gen.n_states();
  if (mu.size() != n)
    throw QsdError(ErrKind::DimensionMismatch,
                   "mu has " + std::to_string(mu.size()) + " states, generator has " +
                       std::to_string(n));
  require_absorbing_everywhere(gen);

  // pi^mu is proportional to mu (-Q_C)^{-1}: solve (-Q_C)^T x = mu.
  std::vector<double> x;
  if (gen.tridiagonal()) {
    std::vector<double> lower(static_cast<size_t>(n), 0.0),
        diag(static_cast<size_t>(n), 0.0), upper(static_cast<size_t>(n), 0.0);
    for (int j = 1; j <= n; ++j) {
      diag[static_cast<size_t>(j) - 1] = gen.exit_rate(j);
      for (const RateEntry& e : gen.row(j)) {
        // rate j -> j+1 appears below the diagonal of the transpose
        if (e.target == j + 1) lower[static_cast<size_t>(j)] = -e.rate;
        if (e.target == j - 1 && e.target != 0) upper[static_cast<size_t>(j) - 2] = -e.rate;
      }
    }
    x = solve_tridiagonal(std::move(lower), std::move(diag), std::move(upper), mu.mass());
  } else {
    std::vector<double> a(static_cast<size_t>(n) * static_cast<size_t>(n), 0.0);
    for (int i = 1; i <= n; ++i) {
      a[(static_cast<size_t>(i) - 1) * static_cast<size_t>(n) +
        (static_cast<size_t>(i) - 1)] = gen.exit_rate(i);
      for (const RateEntry& e : gen.row(i))
        if (e.target != 0)
          a[(static_cast<size_t>(e.target) - 1) * static_cast<size_t>(n) +
            (static_cast<size_t>(i) - 1)] -= e.rate;
    }
    x = solve_dense(std::move(a), mu.mass());
  }

  KahanSum total;
  for (double v : x) total.add(v);
  double s = total.value();
  if (!(s > 0.0) || !std::isfinite(s))
    throw QsdError(ErrKind::SingularSystem, "occupation solve produced no mass");
  for (double& v : x) v /= s;
  for (double v : x)
    if (v < -1e-12)
      throw QsdError(ErrKind::SingularSystem,
                     "occupation solve produced a negative component");
  return ProbDist::normalized(std::move(x), 1e-12);
}

std::pair<QsdResult, IterationTrace> iterate_return_map(
    const Generator& gen, const ProbDist& mu0, double tol, int max_iter,
    const std::atomic<bool>* cancel) {
  if (!(tol > 0.0)) throw QsdError(ErrKind::InvalidParams, "tol must be positive");
  if (max_iter <= 0) max_iter = 10 * gen.n_states();

  IterationTrace trace;
  trace.iterates.push_back(mu0);
  ProbDist mu = mu0;
  for (int it = 0; it < max_iter; ++it) {
    if (cancel && cancel->load()) break;
    ProbDist next = pi_mu(gen, mu);
    double res = tv_distance(next, mu);
    trace.iterates.push_back(next);
    trace.residuals.push_back(res);
    mu = std::move(next);
    if (res < tol) {
      trace.converged = true;
      break;
    }
  }

  // max ratio of successive residuals, skipping the noise floor
  double worst = 0.0;
  for (size_t k = 0; k + 1 < trace.residuals.size(); ++k) {
    double a = trace.residuals[k], b = trace.residuals[k + 1];
    if (a > 1e-13 && b > 1e-13) worst = std::max(worst, b / a);
  }
  trace.contraction_observed = worst;

  QsdResult res{mu, exit_rate(gen, mu), QsdMethod::ReturnMapIteration};
  return {std::move(res), std::move(trace)};
}

QsdResult qsd_spectral_oracle(const Generator& gen, double h_step, double tol,
                              long max_iter, const std::atomic<bool>* cancel) {
  int n = gen.n_states();
  double maxq = gen.max_exit_rate();
  double h = h_step == 0.0 ? 0.5 / maxq : h_step;
  if (!(h > 0.0)) throw QsdError(ErrKind::StepTooLarge, "h_step must be positive");
  if (h >= 1.0 / maxq)
    throw QsdError(ErrKind::StepTooLarge,
                   "h_step >= 1/max q_i makes the skeleton invalid");
  if (!(tol > 0.0)) throw QsdError(ErrKind::InvalidParams, "tol must be positive");

  std::vector<double> v(static_cast<size_t>(n), 1.0 / n), w(static_cast<size_t>(n));
  double rho = 1.0;
  double prev_delta = -1.0;
  std::deque<double> ratios;
  bool converged = false;

  for (long it = 0; it < max_iter; ++it) {
    if (cancel && cancel->load())
      throw QsdError(ErrKind::NotConverged, "spectral oracle cancelled");
    rho = skeleton_multiply(gen, h, v, w);
    if (!(rho > 0.0))
      throw QsdError(ErrKind::NotConverged, "skeleton iteration lost all mass");
    for (double& x : w) x /= rho;
    double delta = tv_raw(w, v);
    v.swap(w);

    if (prev_delta > 0.0) {
      ratios.push_back(std::min(delta / prev_delta, 1.0 - 1e-9));
      if (ratios.size() > 3) ratios.pop_front();
    }
    prev_delta = delta;
    if (delta <= 1e-15) {
      converged = true;
      break;
    }
    if (!ratios.empty()) {
      double r = *std::max_element(ratios.begin(), ratios.end());
      if (delta * r / (1.0 - r) < tol) {
        converged = true;
        break;
      }
    }
  }
  if (!converged)
    throw QsdError(ErrKind::NotConverged,
                   "skeleton power iteration did not converge within max_iter");

  // eigenpair residual check: never return a silent wrong answer
  rho = skeleton_multiply(gen, h, v, w);
  for (double& x : w) x /= rho;
  double resid = tv_raw(w, v);
  if (resid > std::max(100.0 * tol, 1e-10))
    throw QsdError(ErrKind::NotConverged,
                   "converged vector fails the eigenpair residual check");

  double lambda = (1.0 - rho) / h;
  return {ProbDist::normalized(std::move(v), 1e-12), lambda, QsdMethod::SpectralOracle};
}

double exit_rate(const Generator& gen, const ProbDist& dist) {
  if (dist.size() != gen.n_states())
    throw QsdError(ErrKind::DimensionMismatch, "distribution/generator size mismatch");
  KahanSum acc;
  for (int i = 1; i <= gen.n_states(); ++i)
    acc.add(dist.prob(i) * gen.absorption_rate(i));
  return acc.value();
}

double u_general(const Generator& gen) {
  KahanSum acc;
  for (int k = 1; k <= gen.n_states(); ++k) {
    double qk0 = gen.absorption_rate(k);
    if (qk0 <= 0.0) continue;
    double ek = mean_hitting_time(gen, {k, 0})[static_cast<size_t>(k) - 1];
    if (std::isinf(ek)) continue;  // an infinite return time contributes nothing
    acc.add(qk0 / (gen.exit_rate(k) * ek));
  }
  return acc.value();
}

SteinSolution stein_solve(const Generator& gen, const ProbDist& mu,
                          const std::vector<double>& f, int gauge_state) {
  int n = gen.n_states();
  if (static_cast<int>(f.size()) != n)
    throw QsdError(ErrKind::DimensionMismatch, "test function is not defined on C");
  if (gauge_state < 1 || gauge_state > n)
    throw QsdError(ErrKind::IndexOutOfRange, "gauge state outside C");
  for (double x : f)
    if (!std::isfinite(x))
      throw QsdError(ErrKind::InvalidParams, "test function must be bounded");

  ProbDist pi = pi_mu(gen, mu);
  KahanSum pf;
  for (int i = 1; i <= n; ++i) pf.add(pi.prob(i) * f[static_cast<size_t>(i) - 1]);
  double pi_f = pf.value();

  // dense Q^mu: Q_C plus the rank-one return block q_{i0} mu_j
  size_t un = static_cast<size_t>(n);
  std::vector<double> qmu(un * un, 0.0);
  for (int i = 1; i <= n; ++i) {
    size_t r = static_cast<size_t>(i) - 1;
    qmu[r * un + r] = -gen.exit_rate(i);
    for (const RateEntry& e : gen.row(i))
      if (e.target != 0) qmu[r * un + static_cast<size_t>(e.target) - 1] += e.rate;
    double qi0 = gen.absorption_rate(i);
    if (qi0 > 0.0)
      for (int j = 1; j <= n; ++j)
        qmu[r * un + static_cast<size_t>(j) - 1] += qi0 * mu.prob(j);
  }

  // gauge h(g) = 0: drop column g and the redundant row g
  size_t g = static_cast<size_t>(gauge_state) - 1;
  size_t rn = un - 1;
  std::vector<double> a(rn * rn, 0.0), rhs(rn, 0.0);
  for (size_t r = 0, rr = 0; r < un; ++r) {
    if (r == g) continue;
    for (size_t c = 0, cc = 0; c < un; ++c) {
      if (c == g) continue;
      a[rr * rn + cc] = qmu[r * un + c];
      ++cc;
    }
    rhs[rr] = f[r] - pi_f;
    ++rr;
  }
  std::vector<double> hr = solve_dense(std::move(a), std::move(rhs));

  SteinSolution sol;
  sol.f = f;
  sol.pi_f = pi_f;
  sol.gauge_state = gauge_state;
  sol.h.assign(un, 0.0);
  for (size_t r = 0, rr = 0; r < un; ++r) {
    if (r == g) continue;
    sol.h[r] = hr[rr++];
  }

  // Dynkin identity pi^mu(Q^mu h) = 0, evaluated with the assembled matrix
  double fnorm = 0.0;
  for (double x : f) fnorm = std::max(fnorm, std::abs(x));
  KahanSum dynkin;
  for (size_t r = 0; r < un; ++r) {
    KahanSum row;
    for (size_t c = 0; c < un; ++c) row.add(qmu[r * un + c] * sol.h[c]);
    dynkin.add(pi.prob(static_cast<int>(r) + 1) * row.value());
  }
  sol.dynkin_residual = std::abs(dynkin.value());
  if (sol.dynkin_residual > 1e-9 * std::max(1.0, fnorm))
    throw QsdError(ErrKind::SingularSystem,
                   "Stein solve failed the Dynkin identity at 1e-9");
  return sol;
}

ContractionCheck check_contraction(const Generator& gen, const ProbDist& mu,
                                   const ProbDist& nu, const BoundsReport& report) {
  ProbDist pm = pi_mu(gen, mu);
  ProbDist pn = pi_mu(gen, nu);
  double lhs = 2.0 * tv_distance(pn, pm);
  double dmn = 2.0 * tv_distance(nu, mu);
  ContractionCheck out{};
  out.lhs = lhs;
  out.rhs = report.contraction * dmn;
  out.rhs_sharp = (2.0 * report.T / report.p) * exit_rate(gen, pm) * dmn;
  out.holds = lhs <= out.rhs + 1e-10;
  out.asserted = report.certificate_valid;
  return out;
}

}  // namespace qsd
