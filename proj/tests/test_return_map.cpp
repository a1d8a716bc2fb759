#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <functional>

#include "doctest.h"
#include "qsd/bd_model.hpp"
#include "qsd/return_map.hpp"
#include "test_util.hpp"

using namespace qsd;
using qsd::test::TestRng;

namespace {

/// Dense 3x3 eigen oracle for the unit chain b = d = 1, N = 3: the QSD decay
/// rate is the smallest root of x^3 - 5x^2 + 6x - 1 = 0, with eigenvector
/// (1, 2-x, (2-x)^2 - 1).
struct Eigen3 {
  double lambda;
  double m[3];
};

Eigen3 unit_chain3_oracle() {
  auto p = [](double x) { return ((x - 5.0) * x + 6.0) * x - 1.0; };
  double lo = 0.1, hi = 0.3;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    (p(lo) * p(mid) <= 0.0 ? hi : lo) = mid;
  }
  double x = 0.5 * (lo + hi);
  double v1 = 1.0, v2 = 2.0 - x, v3 = (2.0 - x) * (2.0 - x) - 1.0;
  double s = v1 + v2 + v3;
  return {x, {v1 / s, v2 / s, v3 / s}};
}

std::vector<BirthDeathModel> valid_roster() {
  std::vector<BirthDeathModel> models;
  models.push_back(make_logistic({2.0, 1.0, 1.0, 15.0, 150}));
  models.push_back(make_logistic({2.0, 1.0, 1.0, 20.0, 200}));
  models.push_back(make_sis({2.0, 1.0, 60}));
  models.push_back(make_sis({3.0, 1.0, 40}));
  return models;
}

Generator scaled(const Generator& g, double c) {
  std::vector<RateTriple> t;
  for (int i = 1; i <= g.n_states(); ++i)
    for (const RateEntry& e : g.row(i)) t.push_back({i, e.target, c * e.rate});
  return Generator::validate(t, g.n_states());
}

}  // namespace

TEST_CASE("pi_mu matches the hand-solved two-state inverses") {
  Generator g = test::toy2();
  ProbDist p1 = pi_mu(g, ProbDist::delta(1, 2));
  CHECK(p1.prob(1) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(p1.prob(2) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  ProbDist p2 = pi_mu(g, ProbDist::delta(2, 2));
  CHECK(p2.prob(1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(p2.prob(2) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("pi_mu agrees with the alpha closed form for mu = delta_1") {
  TestRng rng(41);
  for (int it = 0; it < 20; ++it) {
    BirthDeathModel m = test::random_bd_model(rng, rng.uniform_int(2, 60));
    ProbDist closed = return_dist_delta1(m);
    ProbDist solved = pi_mu(to_generator(m), ProbDist::delta(1, m.n_states()));
    CHECK(tv_distance(closed, solved) <= 1e-11);
  }
}

TEST_CASE("pi_mu is a fixed point at the QSD") {
  Generator g = test::toy2();
  ProbDist m({test::kToyM1, test::kToyM2});
  ProbDist out = pi_mu(g, m);
  CHECK(tv_distance(out, m) <= 1e-12);
}

TEST_CASE("pi_mu is invariant under time rescaling") {
  TestRng rng(43);
  for (int it = 0; it < 10; ++it) {
    BirthDeathModel bd = test::random_bd_model(rng, rng.uniform_int(2, 30));
    Generator g = to_generator(bd);
    ProbDist mu = test::random_prob(rng, bd.n_states());
    ProbDist a = pi_mu(g, mu);
    ProbDist b = pi_mu(scaled(g, 7.3), mu);
    CHECK(tv_distance(a, b) <= 1e-12);
  }
}

TEST_CASE("pi_mu output is stationary for the return generator (dense path)") {
  TestRng rng(97);
  for (int it = 0; it < 15; ++it) {
    int n = rng.uniform_int(3, 12);
    std::vector<RateTriple> t;
    for (int i = 1; i <= n; ++i) {
      t.push_back({i, i - 1, 1.0});  // backbone guarantees absorption paths
      int j = rng.uniform_int(0, n);
      if (j != i) t.push_back({i, j, rng.uniform(0.1, 2.0)});
    }
    t.push_back({1, n, rng.uniform(0.1, 2.0)});  // long-range edge
    Generator g = Generator::validate(t, n);
    if (n > 2) REQUIRE_FALSE(g.tridiagonal());

    ProbDist mu = test::random_prob(rng, n);
    ProbDist pi = pi_mu(g, mu);
    Generator ret = return_generator(g, mu);
    std::vector<double> flow(static_cast<size_t>(n), 0.0);
    for (int i = 1; i <= n; ++i) {
      flow[static_cast<size_t>(i) - 1] -= pi.prob(i) * ret.exit_rate(i);
      for (const RateEntry& e : ret.row(i))
        flow[static_cast<size_t>(e.target) - 1] += pi.prob(i) * e.rate;
    }
    for (double f : flow) CHECK(std::abs(f) <= 1e-12 * g.max_exit_rate());
  }
}

TEST_CASE("pi_mu rejects chains that cannot reach the cemetery") {
  Generator bad = Generator::conservative({{1, 0, 1.0}, {2, 3, 1.0}, {3, 2, 1.0}}, 3);
  CHECK_THROWS_AS(pi_mu(bad, ProbDist::uniform(3)), QsdError);
}

TEST_CASE("iterate_return_map solves the two-state chain") {
  Generator g = test::toy2();
  auto [res, trace] = iterate_return_map(g, ProbDist::delta(1, 2), 1e-12);
  CHECK(trace.converged);
  CHECK(res.m.prob(1) == doctest::Approx(test::kToyM1).epsilon(1e-10));
  CHECK(res.m.prob(2) == doctest::Approx(test::kToyM2).epsilon(1e-10));
  CHECK(res.lambda_m == doctest::Approx(test::kToyLambda).epsilon(1e-10));

  // starting at the fixed point converges in one sweep
  auto [res2, trace2] = iterate_return_map(g, res.m, 1e-11);
  CHECK(trace2.converged);
  CHECK(trace2.residuals.size() == 1);
}

TEST_CASE("iterate_return_map reports an honest convergence flag") {
  Generator g = test::toy2();
  auto [res, trace] = iterate_return_map(g, ProbDist::delta(1, 2), 1e-12, 2);
  CHECK_FALSE(trace.converged);
  CHECK(trace.residuals.size() == 2);
  CHECK(res.lambda_m > 0.0);
}

TEST_CASE("iteration and oracle honor the cancellation token") {
  Generator g = test::toy2();
  std::atomic<bool> cancel{true};
  auto [res, trace] = iterate_return_map(g, ProbDist::delta(1, 2), 1e-12, 0, &cancel);
  CHECK_FALSE(trace.converged);
  CHECK(trace.residuals.empty());
  CHECK_THROWS_AS(qsd_spectral_oracle(g, 0.0, 1e-13, 50'000'000, &cancel), QsdError);
}

TEST_CASE("iteration trace: residuals contract and stay below the certificate") {
  for (const BirthDeathModel& m : valid_roster()) {
    BoundsReport rep = certificate(m);
    REQUIRE(rep.certificate_valid);
    Generator g = to_generator(m);
    auto [res, trace] = iterate_return_map(g, ProbDist::delta(1, m.n_states()), 1e-12);
    CHECK(trace.converged);
    CHECK(trace.contraction_observed <= rep.contraction + 0.05);
    for (size_t k = 0; k + 1 < trace.residuals.size(); ++k)
      if (trace.residuals[k] < 1e-3 && trace.residuals[k] > 1e-13)
        CHECK(trace.residuals[k + 1] <= 1.1 * trace.residuals[k]);
  }
}

TEST_CASE("spectral oracle matches the two-state eigenpair") {
  QsdResult r = qsd_spectral_oracle(test::toy2());
  CHECK(r.m.prob(1) == doctest::Approx(test::kToyM1).epsilon(1e-10));
  CHECK(r.m.prob(2) == doctest::Approx(test::kToyM2).epsilon(1e-10));
  CHECK(r.lambda_m == doctest::Approx(test::kToyLambda).epsilon(1e-10));
}

TEST_CASE("spectral oracle matches the dense 3x3 eigen oracle") {
  Eigen3 want = unit_chain3_oracle();
  std::vector<RateTriple> t{{1, 0, 1.0}, {1, 2, 1.0}, {2, 1, 1.0},
                            {2, 3, 1.0}, {3, 2, 1.0}};
  QsdResult r = qsd_spectral_oracle(Generator::validate(t, 3));
  CHECK(r.lambda_m == doctest::Approx(want.lambda).epsilon(1e-10));
  for (int j = 1; j <= 3; ++j)
    CHECK(r.m.prob(j) == doctest::Approx(want.m[j - 1]).epsilon(1e-9));
}

TEST_CASE("spectral oracle rejects an invalid step") {
  Generator g = test::toy2();
  CHECK_THROWS_AS(qsd_spectral_oracle(g, 0.5), QsdError);  // 1/max q = 0.5
  CHECK_THROWS_AS(qsd_spectral_oracle(g, -0.1), QsdError);
}

TEST_CASE("spectral oracle never returns a silent wrong answer on reducible chains") {
  // 2 -> 1 -> 0 with no return path: the conditional law tilts to state 1
  Generator g = Generator::validate({{1, 0, 1.0}, {2, 1, 1.0}}, 2);
  try {
    QsdResult r = qsd_spectral_oracle(g);
    CHECK(r.m.prob(1) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(r.lambda_m == doctest::Approx(1.0).epsilon(1e-6));
  } catch (const QsdError& e) {
    CHECK(e.kind() == ErrKind::NotConverged);
  }
}

TEST_CASE("iteration and oracle agree on certificate-valid models") {
  for (const BirthDeathModel& m : valid_roster()) {
    Generator g = to_generator(m);
    auto [it_res, trace] = iterate_return_map(g, ProbDist::delta(1, m.n_states()), 1e-12);
    QsdResult orc = qsd_spectral_oracle(g);
    CHECK(tv_distance(it_res.m, orc.m) <= 1e-9);
    CHECK(std::abs(it_res.lambda_m - orc.lambda_m) <= 1e-9);
  }
}

TEST_CASE("qsd results satisfy the scaled stationarity residual") {
  // max_j |sum_i m_i Q_C(i,j) + lambda m_j| / q_j <= 1e-9
  auto residual = [](const Generator& g, const QsdResult& r) {
    int n = g.n_states();
    std::vector<double> flow(static_cast<size_t>(n), 0.0);
    for (int i = 1; i <= n; ++i) {
      flow[static_cast<size_t>(i) - 1] -= r.m.prob(i) * g.exit_rate(i);
      for (const RateEntry& e : g.row(i))
        if (e.target != 0)
          flow[static_cast<size_t>(e.target) - 1] += r.m.prob(i) * e.rate;
    }
    double worst = 0.0;
    for (int j = 1; j <= n; ++j)
      worst = std::max(worst, std::abs(flow[static_cast<size_t>(j) - 1] +
                                       r.lambda_m * r.m.prob(j)) /
                                  g.exit_rate(j));
    return worst;
  };

  Generator toy = test::toy2();
  auto [it_res, trace] = iterate_return_map(toy, ProbDist::delta(1, 2), 1e-13);
  CHECK(residual(toy, it_res) <= 1e-9);
  CHECK(residual(toy, qsd_spectral_oracle(toy)) <= 1e-9);

  Generator lg = to_generator(make_logistic({2.0, 1.0, 1.0, 20.0, 200}));
  auto [lg_res, lg_trace] = iterate_return_map(lg, ProbDist::delta(1, 200), 1e-13);
  CHECK(residual(lg, lg_res) <= 1e-9);
  CHECK(residual(lg, qsd_spectral_oracle(lg)) <= 1e-9);
}

TEST_CASE("exit_rate basics") {
  Generator g = test::toy2();
  CHECK(exit_rate(g, ProbDist::delta(1, 2)) == doctest::Approx(1.0));
  CHECK(exit_rate(g, ProbDist::delta(2, 2)) == 0.0);
  ProbDist m({test::kToyM1, test::kToyM2});
  CHECK(exit_rate(g, m) == doctest::Approx(test::kToyLambda).epsilon(1e-12));
}

TEST_CASE("u_general equals the birth-death closed form") {
  CHECK(u_general(test::toy2()) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  TestRng rng(47);
  for (int it = 0; it < 20; ++it) {
    BirthDeathModel m = test::random_bd_model(rng, rng.uniform_int(2, 50));
    CHECK(u_general(to_generator(m)) == doctest::Approx(u_exact(m)).epsilon(1e-8));
  }
}

TEST_CASE("lambda_m is bounded by U") {
  for (const BirthDeathModel& m : valid_roster()) {
    Generator g = to_generator(m);
    auto [res, trace] = iterate_return_map(g, ProbDist::delta(1, m.n_states()), 1e-12);
    CHECK(res.lambda_m <= u_exact(m) + 1e-12);
    CHECK(res.lambda_m <= u_general(g) + 1e-12);
  }
}

TEST_CASE("equilibrium bound: pi_mu(j) <= 1/(q_j E_j tau_{j,0})") {
  TestRng rng(53);
  for (int it = 0; it < 10; ++it) {
    BirthDeathModel m = test::random_bd_model(rng, rng.uniform_int(2, 60));
    Generator g = to_generator(m);
    for (const ProbDist& mu :
         {ProbDist::delta(1, m.n_states()), ProbDist::uniform(m.n_states())}) {
      ProbDist pi = pi_mu(g, mu);
      for (int j = 1; j <= m.n_states(); ++j) {
        double ej = mean_hitting_time(g, {j, 0})[static_cast<size_t>(j) - 1];
        CHECK(pi.prob(j) <= 1.0 / (g.exit_rate(j) * ej) + 1e-9);
      }
    }
  }
}

TEST_CASE("stein_solve on constants and the hand 2x2 oracle") {
  Generator g = test::toy2();
  ProbDist mu = ProbDist::delta(1, 2);

  SteinSolution c = stein_solve(g, mu, {3.5, 3.5}, 1);
  CHECK(c.pi_f == doctest::Approx(3.5));
  CHECK(c.h[0] == 0.0);
  CHECK(std::abs(c.h[1]) <= 1e-12);

  // f = 1_{state 1}: pi_f = 2/3 and h = (0, 1/3) under the gauge h(1) = 0
  SteinSolution s = stein_solve(g, mu, {1.0, 0.0}, 1);
  CHECK(s.pi_f == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(s.h[0] == 0.0);
  CHECK(s.h[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(s.dynkin_residual <= 1e-12);
}

TEST_CASE("stein solutions obey the T/p Lipschitz bound") {
  TestRng rng(59);
  // Condition A alone gives the bound, so the A=10 model joins the roster
  std::vector<BirthDeathModel> models = valid_roster();
  models.push_back(make_logistic({2.0, 1.0, 1.0, 10.0, 100}));
  for (const BirthDeathModel& m : models) {
    SChoice sc = choose_s(m);
    TBounds tb = t_bounds(m, sc.s);
    double p = p_bound(m, sc.s);
    Generator g = to_generator(m);
    for (const ProbDist& mu :
         {ProbDist::delta(1, m.n_states()), ProbDist::uniform(m.n_states())}) {
      for (int rep = 0; rep < 3; ++rep) {
        std::vector<double> f(static_cast<size_t>(m.n_states()));
        double fmax = 0.0;
        for (double& x : f) {
          x = rng.uniform(-1.0, 1.0);
          fmax = std::max(fmax, std::abs(x));
        }
        for (double& x : f) x /= fmax;  // ||f|| = 1
        SteinSolution sol = stein_solve(g, mu, f, sc.s);
        CHECK(sol.dynkin_residual <= 1e-9);
        double sup = 0.0;
        for (double h : sol.h) sup = std::max(sup, std::abs(h));
        CHECK(sup <= 2.0 * tb.T / p + 1e-9);
      }
    }
  }
}

TEST_CASE("check_contraction on identical measures and random pairs") {
  BirthDeathModel m = make_logistic({2.0, 1.0, 1.0, 20.0, 200});
  BoundsReport rep = certificate(m);
  REQUIRE(rep.certificate_valid);
  Generator g = to_generator(m);

  ProbDist mu = ProbDist::delta(1, 200);
  ContractionCheck same = check_contraction(g, mu, mu, rep);
  CHECK(same.lhs <= 1e-12);
  CHECK(same.rhs == 0.0);
  CHECK(same.holds);
  CHECK(same.asserted);

  TestRng rng(61);
  for (int it = 0; it < 25; ++it) {
    ProbDist a = test::random_prob(rng, 200);
    ProbDist b = test::random_prob(rng, 200);
    ContractionCheck c = check_contraction(g, a, b, rep);
    CHECK(c.holds);
    CHECK(c.rhs_sharp <= c.rhs * (1.0 + 1e-9));
  }
}

TEST_CASE("check_contraction still reports when the certificate is invalid") {
  BoundsReport rep = certificate(test::toy2_bd());
  REQUIRE_FALSE(rep.certificate_valid);
  Generator g = test::toy2();
  ContractionCheck c =
      check_contraction(g, ProbDist::delta(1, 2), ProbDist::delta(2, 2), rep);
  CHECK_FALSE(c.asserted);
  CHECK(c.lhs > 0.0);
  CHECK(c.rhs == doctest::Approx(2.0));  // contraction = 1 times ||nu - mu|| = 2
}
