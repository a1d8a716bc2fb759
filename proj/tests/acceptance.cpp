#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <chrono>
#include <cmath>
#include <cstdio>

#include "doctest.h"
#include "qsd/bd_model.hpp"
#include "qsd/generator.hpp"
#include "qsd/return_map.hpp"
#include "qsd/simulate.hpp"
#include "test_util.hpp"

using namespace qsd;
using qsd::test::TestRng;

namespace {

struct Timer {
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  double ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
        .count();
  }
};

void report(const char* id, const char* name, bool pass) {
  std::printf("[criterion %s] %s: %s\n", id, name, pass ? "PASS" : "FAIL");
  std::fflush(stdout);
}

BirthDeathModel logistic20() { return make_logistic({2.0, 1.0, 1.0, 20.0, 200}); }

Generator unit_chain(int n) {
  std::vector<RateTriple> t;
  for (int i = 1; i <= n; ++i) {
    if (i < n) t.push_back({i, i + 1, 1.0});
    t.push_back({i, i - 1, 1.0});
  }
  return Generator::validate(t, n);
}

}  // namespace

TEST_CASE("criterion 01 two-state analytic instance") {
  Generator g = test::toy2();
  Timer timer;
  auto [it_res, trace] = iterate_return_map(g, ProbDist::delta(1, 2), 1e-12);
  QsdResult orc = qsd_spectral_oracle(g);
  double elapsed = timer.ms();

  bool iterate_ok = std::abs(it_res.m.prob(1) - 0.5857864376) <= 1e-9 &&
                    std::abs(it_res.m.prob(2) - 0.4142135624) <= 1e-9 &&
                    std::abs(it_res.lambda_m - 0.5857864376) <= 1e-9;
  bool oracle_ok = std::abs(orc.m.prob(1) - 0.5857864376) <= 1e-9 &&
                   std::abs(orc.m.prob(2) - 0.4142135624) <= 1e-9 &&
                   std::abs(orc.lambda_m - 0.5857864376) <= 1e-9;
  bool fast = elapsed < 10.0;
  CHECK(iterate_ok);
  CHECK(oracle_ok);
  CHECK(fast);
  std::printf("[criterion 01] runtime %.3f ms\n", elapsed);
  report("01", "two-state analytic instance", iterate_ok && oracle_ok && fast);
}

TEST_CASE("criterion 02 theorem-1 certificate on the A=20 logistic model") {
  Timer timer;
  BirthDeathModel m = logistic20();
  BoundsReport rep = certificate(m);
  Generator g = to_generator(m);
  ProbDist mu0 = ProbDist::delta(1, 200);
  auto [qsd_res, trace] = iterate_return_map(g, mu0, 1e-12);
  ProbDist pi1 = pi_mu(g, mu0);
  double elapsed = timer.ms();

  bool valid = rep.certificate_valid;
  double d = tv_distance(qsd_res.m, pi1);
  bool tv_ok = d <= rep.contraction;
  bool lambda_ok = qsd_res.lambda_m <= rep.U;
  bool u_ok = rep.U <= std::pow(4.0 / 3.0, -10.0);
  bool fast = elapsed < 1000.0;
  CHECK(valid);
  CHECK(tv_ok);
  CHECK(lambda_ok);
  CHECK(u_ok);
  CHECK(fast);
  std::printf(
      "[criterion 02] contraction=%.6g d_tv(m,pi_d1)=%.6g lambda_m=%.6g U=%.6g "
      "runtime %.1f ms\n",
      rep.contraction, d, qsd_res.lambda_m, rep.U, elapsed);
  report("02", "theorem-1 certificate (logistic A=20)",
         valid && tv_ok && lambda_ok && u_ok && fast);
}

TEST_CASE("criterion 03 contraction property over 100 random pairs") {
  BirthDeathModel m = logistic20();
  BoundsReport rep = certificate(m);
  REQUIRE(rep.certificate_valid);
  Generator g = to_generator(m);
  TestRng rng(101);
  int violations = 0;
  for (int it = 0; it < 100; ++it) {
    ProbDist mu = test::random_prob(rng, 200);
    ProbDist nu = test::random_prob(rng, 200);
    ContractionCheck c = check_contraction(g, mu, nu, rep);
    if (!c.holds) ++violations;
  }
  CHECK(violations == 0);
  report("03", "contraction inequality, 100 random (mu,nu) pairs", violations == 0);
}

TEST_CASE("criterion 04 equilibrium bound on 20 random models") {
  TestRng rng(104);
  bool ok = true;
  for (int it = 0; it < 20; ++it) {
    BirthDeathModel m = test::random_bd_model(rng, rng.uniform_int(2, 60));
    Generator g = to_generator(m);
    for (const ProbDist& mu :
         {ProbDist::delta(1, m.n_states()), ProbDist::uniform(m.n_states())}) {
      ProbDist pi = pi_mu(g, mu);
      for (int j = 1; j <= m.n_states(); ++j) {
        double ej = mean_hitting_time(g, {j, 0})[static_cast<size_t>(j) - 1];
        bool pass = pi.prob(j) <= 1.0 / (g.exit_rate(j) * ej) + 1e-9;
        CHECK(pass);
        ok = ok && pass;
      }
    }
  }
  report("04", "equilibrium bound pi_mu(j) <= 1/(q_j E_j tau_{j,0})", ok);
}

TEST_CASE("criterion 05 cross-module identities on 20 random models") {
  TestRng rng(105);
  bool ok = true;
  for (int it = 0; it < 20; ++it) {
    BirthDeathModel m = test::random_bd_model(rng, rng.uniform_int(2, 60));
    Generator g = to_generator(m);
    int n = m.n_states();

    double ug = u_general(g), ue = u_exact(m);
    bool u_ok = std::abs(ug - ue) <= 1e-8 * ue;
    CHECK(u_ok);

    int s = rng.uniform_int(1, n);
    auto closed = hit_prob_closed_form(m, s);
    auto solved = hit_probability(g, {{s}, {0}});
    bool hit_ok = true;
    for (int k = 1; k <= n; ++k)
      hit_ok = hit_ok && std::abs(closed[static_cast<size_t>(k) - 1] -
                                  solved[static_cast<size_t>(k) - 1]) <= 1e-10;
    CHECK(hit_ok);

    bool up_ok = true;
    for (int i = 2; i <= n; ++i) {
      double exact = mean_hitting_time(g, {i - 1})[static_cast<size_t>(i) - 1];
      up_ok = up_ok && std::abs(mean_upcross_time(m, i) - exact) <= 1e-8 * exact;
    }
    CHECK(up_ok);
    ok = ok && u_ok && hit_ok && up_ok;
  }
  report("05", "u_general/hit-prob/upcross identities at relative 1e-8", ok);
}

TEST_CASE("criterion 06 stein suite on certificate-valid models") {
  std::vector<BirthDeathModel> models;
  models.push_back(make_logistic({2.0, 1.0, 1.0, 15.0, 150}));
  models.push_back(logistic20());
  models.push_back(make_sis({2.0, 1.0, 60}));
  models.push_back(make_sis({3.0, 1.0, 40}));

  TestRng rng(106);
  bool ok = true;
  for (const BirthDeathModel& m : models) {
    BoundsReport rep = certificate(m);
    REQUIRE(rep.certificate_valid);
    Generator g = to_generator(m);
    int n = m.n_states();
    for (const ProbDist& mu : {ProbDist::delta(1, n), ProbDist::uniform(n)}) {
      for (int r = 0; r < 5; ++r) {  // 10 random f per model across both mu
        std::vector<double> f(static_cast<size_t>(n));
        double fmax = 0.0;
        for (double& x : f) {
          x = rng.uniform(-1.0, 1.0);
          fmax = std::max(fmax, std::abs(x));
        }
        for (double& x : f) x /= fmax;
        SteinSolution sol = stein_solve(g, mu, f, rep.s);
        bool dynkin_ok = sol.dynkin_residual <= 1e-9;
        double sup = 0.0;
        for (double h : sol.h) sup = std::max(sup, std::abs(h));
        bool lip_ok = sup <= 2.0 * rep.T / rep.p + 1e-9;
        CHECK(dynkin_ok);
        CHECK(lip_ok);
        ok = ok && dynkin_ok && lip_ok;
      }
    }
  }
  report("06", "stein suite: Dynkin 1e-9 and 2||f||T/p Lipschitz bound", ok);
}

TEST_CASE("criterion 07 monte-carlo consistency at seed 42") {
  Timer timer;
  SimConfig cfg;
  cfg.seed = 42;
  cfg.replicates = 100000;

  Generator chain5 = unit_chain(5);
  SimEstimate hit = estimate_hit_prob(chain5, 1, 3, cfg);
  bool hit_ok = std::abs(hit.value - 1.0 / 3.0) <= 3.0 * hit.std_error;
  CHECK(hit_ok);

  Generator toy = test::toy2();
  SimEstimate mt = estimate_mean_hitting_time(toy, 1, {1, 0}, cfg);
  bool mean_ok = std::abs(mt.value - 0.75) <= 3.0 * mt.std_error;
  CHECK(mean_ok);

  SimConfig occ_cfg = cfg;
  occ_cfg.replicates = 8;
  occ_cfg.t_max = 1e5;
  ProbDist occ = simulate_return_occupation(toy, ProbDist::delta(1, 2), occ_cfg);
  double occ_tv = tv_distance(occ, ProbDist({2.0 / 3.0, 1.0 / 3.0}));
  bool occ_ok = occ_tv <= 0.01;
  CHECK(occ_ok);

  ProbDist m({test::kToyM1, test::kToyM2});
  ProbDist occ_m = simulate_return_occupation(toy, m, occ_cfg);
  bool occ_m_ok = tv_distance(occ_m, m) <= 0.01;
  CHECK(occ_m_ok);

  bool surv_ok = true;
  for (double scale : {0.1, 1.0, 10.0}) {
    double t = scale / test::kToyLambda;
    SimEstimate s = estimate_survival(toy, m, t, cfg);
    double want = std::exp(-test::kToyLambda * t);
    bool pass = std::abs(s.value - want) <= 3.0 * s.std_error;
    CHECK(pass);
    surv_ok = surv_ok && pass;
  }

  double elapsed = timer.ms();
  bool fast = elapsed < 60000.0;
  CHECK(fast);
  std::printf("[criterion 07] occupation tv=%.4g runtime %.0f ms\n", occ_tv, elapsed);
  report("07", "monte-carlo estimates within 3 standard errors",
         hit_ok && mean_ok && occ_ok && occ_m_ok && surv_ok && fast);
}

TEST_CASE("criterion 08 theorem-2 window and lemma checks") {
  BirthDeathModel m = logistic20();
  BoundsReport rep = certificate(m);
  REQUIRE(rep.certificate_valid);
  Generator g = to_generator(m);

  auto [qsd_res, trace] = iterate_return_map(g, ProbDist::delta(1, 200), 1e-12);

  double window_lo = rep.B * rep.B * rep.T / rep.p;
  double window_hi = 1.0 / rep.U;
  double t_star = 100.0 * window_lo;
  std::printf(
      "[criterion 08] window analysis: B^2T/p = %.6g, 1/U = %.6g, prescribed "
      "t = 100*B^2T/p = %.6g, lambda_m*t = %.6g\n",
      window_lo, window_hi, t_star, qsd_res.lambda_m * t_star);
  if (window_lo >= window_hi)
    std::printf(
        "[criterion 08] the window B^2T/p << t << 1/U is empty for this model; "
        "every path is absorbed long before the prescribed t, so the empirical "
        "law at t is the point mass at 0 and its TV distance to m is 1\n");

  SimConfig cfg;
  cfg.seed = 42;
  cfg.replicates = 100000;
  cfg.t_max = t_star * 1.01;
  SubProbDist law = estimate_law_at_t(g, rep.s, t_star, cfg);
  double d = tv_distance(law, SubProbDist::extend(qsd_res.m));
  bool law_ok = d <= 0.05;
  std::printf("[criterion 08] empirical d_tv(law_s(X(t)), m) = %.6g at t = %.6g\n", d,
              t_star);
  CHECK(law_ok);

  SimConfig lem_cfg;
  lem_cfg.seed = 42;
  lem_cfg.replicates = 10000;
  bool lemma_ok = true;
  for (const ProbDist& mu : {ProbDist::delta(1, 200), ProbDist::uniform(200)}) {
    LemmaSMeanCheck chk = check_lemma_s_mean(g, mu, rep.s, rep, {1, rep.s, 200}, lem_cfg);
    CHECK(chk.holds);
    lemma_ok = lemma_ok && chk.holds;
  }
  std::printf("[criterion 08] lemma bound T/p = %.6g: %s\n", rep.T / rep.p,
              lemma_ok ? "holds at all sampled starts" : "violated");
  report("08", "theorem-2 window law check and mean-hitting lemma", law_ok && lemma_ok);
}

TEST_CASE("criterion 09 sis U decays geometrically in N") {
  double u20 = u_exact(make_sis({2.0, 1.0, 20}));
  double u40 = u_exact(make_sis({2.0, 1.0, 40}));
  double u80 = u_exact(make_sis({2.0, 1.0, 80}));
  double factor = std::sqrt(u20);
  bool first = u40 <= u20 * factor;
  bool second = u80 <= u40 * factor;
  CHECK(first);
  CHECK(second);
  std::printf("[criterion 09] U(20)=%.6g U(40)=%.6g U(80)=%.6g ratio-factor=%.4g\n", u20,
              u40, u80, factor);
  report("09", "SIS U(N) geometric decay over N in {20,40,80}", first && second);
}

TEST_CASE("criterion 10 numerical robustness at A=2000") {
  Timer timer;
  BirthDeathModel m = make_logistic({2.0, 1.0, 1.0, 2000.0, 12000});
  BoundsReport rep = certificate(m);
  double elapsed = timer.ms();

  bool finite = std::isfinite(rep.p) && std::isfinite(rep.T1) && std::isfinite(rep.T2) &&
                std::isfinite(rep.T) && std::isfinite(rep.B) && std::isfinite(rep.log_u) &&
                std::isfinite(rep.log_contraction) && rep.U >= 0.0 &&
                std::isfinite(rep.U) && rep.contraction >= 0.0;
  bool sane = rep.s == 2000 && rep.p > 0.0 && rep.p <= 1.0 && rep.certificate_valid &&
              rep.B >= 1.0;
  bool fast = elapsed < 5000.0;
  CHECK(finite);
  CHECK(sane);
  CHECK(fast);
  std::printf("[criterion 10] s=%d p=%.6g T=%.6g log10_U=%.6g runtime %.1f ms\n", rep.s,
              rep.p, rep.T, rep.log_u / std::log(10.0), elapsed);
  report("10", "A=2000 bounds complete in log space without overflow", finite && sane && fast);
}
