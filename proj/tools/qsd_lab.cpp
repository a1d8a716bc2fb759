#include <clocale>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <string>

#include "CLI11.hpp"
#include "qsd/model_io.hpp"
#include "qsd/return_map.hpp"
#include "qsd/simulate.hpp"

namespace {

using namespace qsd;

std::string flag_str(SChoiceFlag f) {
  switch (f) {
    case SChoiceFlag::Ok: return "ok";
    case SChoiceFlag::MonotoneWarning: return "monotone-warning";
    case SChoiceFlag::NonMonotoneRatio: return "non-monotone-ratio";
  }
  return "?";
}

struct OutputSink {
  std::ofstream file;
  std::ostream* os = &std::cout;
  explicit OutputSink(const std::string& path) {
    if (!path.empty() && path != "-") {
      file.open(path);
      if (!file) throw QsdError(ErrKind::ParseError, "cannot open output `" + path + "`");
      os = &file;
    }
  }
  std::ostream& stream() { return *os; }
};

int env_thread_cap() {
  const char* v = std::getenv("QSD_LAB_THREADS");
  if (!v) return 0;
  int t = std::atoi(v);
  return t > 0 ? t : 0;
}

int resolve_threads(int requested) {
  int cap = env_thread_cap();
  if (cap > 0 && (requested <= 0 || requested > cap)) return cap;
  return requested;
}

const BirthDeathModel& need_bd(const ModelInput& mi, const char* cmd) {
  if (!mi.bd)
    throw QsdError(ErrKind::InvalidParams,
                   std::string(cmd) + " needs a birth-death model file (kind=...)");
  return *mi.bd;
}

void print_bounds(std::ostream& os, const BoundsReport& rep) {
  os << "s=" << rep.s << "\n";
  os << "s_flag=" << flag_str(rep.s_flag) << "\n";
  os << "p=" << format_sig12(rep.p) << "\n";
  os << "T1=" << format_sig12(rep.T1) << "\n";
  os << "T2=" << format_sig12(rep.T2) << "\n";
  os << "T=" << format_sig12(rep.T) << "\n";
  os << "U=" << format_sig12(rep.U) << "\n";
  os << "log10_U=" << format_sig12(rep.log_u / std::log(10.0)) << "\n";
  os << "B=" << format_sig12(rep.B) << "\n";
  os << "contraction=" << format_sig12(rep.contraction) << "\n";
  os << "log10_contraction=" << format_sig12(rep.log_contraction / std::log(10.0)) << "\n";
  os << "certificate_valid=" << (rep.certificate_valid ? "true" : "false") << "\n";
  if (!rep.certificate_valid) os << "reason=" << rep.reason << "\n";
}

int run_bounds(const std::string& model, const std::string& output, int s1, int s2) {
  ModelInput mi = read_model_file(model);
  const BirthDeathModel& m = need_bd(mi, "bounds");
  BoundsReport rep = certificate(m);
  OutputSink sink(output);
  print_bounds(sink.stream(), rep);
  if (s1 > 0 && s2 > 0) {
    QuickBounds qb = quick_bounds(m, s1, s2);
    sink.stream() << "p_lo=" << format_sig12(qb.p_lo) << "\n";
    sink.stream() << "U_hi=" << format_sig12(qb.U_hi) << "\n";
    sink.stream() << "T1_hi=" << format_sig12(qb.T1_hi) << "\n";
    sink.stream() << "T2_hi=" << format_sig12(qb.T2_hi) << "\n";
  }
  return 0;
}

int run_qsd(const std::string& model, const std::string& mu_spec, double tol,
            int max_iter, const std::string& output) {
  ModelInput mi = read_model_file(model);
  const Generator& gen = mi.generator();
  ProbDist mu0 = parse_mu_spec(mu_spec, gen.n_states());

  auto [it_res, trace] = iterate_return_map(gen, mu0, tol, max_iter);
  QsdResult oracle = qsd_spectral_oracle(gen);
  double gap = tv_distance(it_res.m, oracle.m);

  std::cout << "lambda_iterate=" << format_sig12(it_res.lambda_m) << "\n";
  std::cout << "lambda_oracle=" << format_sig12(oracle.lambda_m) << "\n";
  std::cout << "lambda_gap=" << format_sig12(std::abs(it_res.lambda_m - oracle.lambda_m))
            << "\n";
  std::cout << "tv_gap=" << format_sig12(gap) << "\n";
  std::cout << "iterations=" << trace.residuals.size() << "\n";
  std::cout << "converged=" << (trace.converged ? "true" : "false") << "\n";

  if (!output.empty()) {
    OutputSink sink(output);
    write_distribution(sink.stream(), it_res.m,
                       {{"lambda_m", format_sig12(it_res.lambda_m)},
                        {"method", "return-map-iteration"},
                        {"residual", format_sig12(trace.residuals.empty()
                                                      ? 0.0
                                                      : trace.residuals.back())}});
  }
  return trace.converged ? 0 : 1;
}

int run_return_dist(const std::string& model, const std::string& mu_spec,
                    const std::string& output) {
  ModelInput mi = read_model_file(model);
  const Generator& gen = mi.generator();
  ProbDist mu = parse_mu_spec(mu_spec, gen.n_states());
  ProbDist pi = pi_mu(gen, mu);
  OutputSink sink(output);
  write_distribution(sink.stream(), pi,
                     {{"lambda_mu", format_sig12(exit_rate(gen, pi))},
                      {"method", "stationary-linear-solve"},
                      {"mu", mu_spec}});
  return 0;
}

int run_iterate(const std::string& model, const std::string& mu_spec, double tol,
                int max_iter, const std::string& output) {
  ModelInput mi = read_model_file(model);
  const Generator& gen = mi.generator();
  ProbDist mu0 = parse_mu_spec(mu_spec, gen.n_states());
  auto [res, trace] = iterate_return_map(gen, mu0, tol, max_iter);
  OutputSink sink(output);
  for (size_t k = 0; k < trace.residuals.size(); ++k)
    sink.stream() << "iter=" << (k + 1)
                  << " residual=" << format_sig12(trace.residuals[k]) << "\n";
  sink.stream() << "converged=" << (trace.converged ? "true" : "false") << "\n";
  sink.stream() << "contraction_observed=" << format_sig12(trace.contraction_observed)
                << "\n";
  sink.stream() << "lambda_m=" << format_sig12(res.lambda_m) << "\n";
  return trace.converged ? 0 : 1;
}

int run_stein(const std::string& model, const std::string& mu_spec, int state,
              const std::string& output) {
  ModelInput mi = read_model_file(model);
  const BirthDeathModel& m = need_bd(mi, "stein");
  const Generator& gen = mi.generator();
  ProbDist mu = parse_mu_spec(mu_spec, gen.n_states());
  if (state < 1 || state > gen.n_states())
    throw QsdError(ErrKind::IndexOutOfRange, "--state outside 1..N");

  BoundsReport rep = certificate(m);
  std::vector<double> f(static_cast<size_t>(gen.n_states()), 0.0);
  f[static_cast<size_t>(state) - 1] = 1.0;
  SteinSolution sol = stein_solve(gen, mu, f, rep.s);

  double sup = 0.0;
  for (double h : sol.h) sup = std::max(sup, std::abs(h));
  double bound = 2.0 * rep.T / rep.p;  // Lipschitz constant for ||f|| = 1

  OutputSink sink(output);
  sink.stream() << "pi_f=" << format_sig12(sol.pi_f) << "\n";
  sink.stream() << "gauge_state=" << sol.gauge_state << "\n";
  sink.stream() << "lipschitz_sup=" << format_sig12(sup) << "\n";
  sink.stream() << "lipschitz_bound=" << format_sig12(bound) << "\n";
  sink.stream() << "lipschitz_holds=" << (sup <= bound ? "true" : "false") << "\n";
  sink.stream() << "dynkin_residual=" << format_sig12(sol.dynkin_residual) << "\n";
  sink.stream() << "certificate_valid=" << (rep.certificate_valid ? "true" : "false")
                << "\n";
  return 0;
}

int run_simulate(const std::string& model, const std::string& quantity, int start,
                 int target, double t, const std::string& mu_spec, double K,
                 SimConfig cfg, const std::string& output) {
  ModelInput mi = read_model_file(model);
  const Generator& gen = mi.generator();
  cfg.threads = resolve_threads(cfg.threads);
  OutputSink sink(output);

  if (quantity == "hit-prob") {
    SimEstimate est = estimate_hit_prob(gen, start, target, cfg);
    write_estimates_csv(sink.stream(), {{"hit_prob", start, target, est, cfg.seed}});
    return 0;
  }
  if (quantity == "mean-time") {
    SimEstimate est = estimate_mean_hitting_time(gen, start, {target, 0}, cfg);
    long total = est.n + est.censored;
    if (total > 0 && est.censored > total / 1000)
      std::cerr << "warning: " << est.censored << "/" << total
                << " replicates hit t_max; the mean is censored\n";
    write_estimates_csv(sink.stream(),
                        {{"mean_hitting_time", start, target, est, cfg.seed}});
    return 0;
  }
  if (quantity == "occupation") {
    ProbDist mu = parse_mu_spec(mu_spec, gen.n_states());
    ProbDist occ = simulate_return_occupation(gen, mu, cfg);
    write_distribution(sink.stream(), occ,
                       {{"method", "return-occupation"},
                        {"t_max", format_sig12(cfg.t_max)},
                        {"seed", std::to_string(cfg.seed)}});
    return 0;
  }
  if (quantity == "law-at-t") {
    SubProbDist law = estimate_law_at_t(gen, start, t, cfg);
    sink.stream() << "# method: empirical-law t=" << format_sig12(t) << "\n";
    sink.stream() << "0 " << format_sig12(law.mass0()) << "\n";
    for (int j = 1; j <= law.size(); ++j)
      sink.stream() << j << " " << format_sig12(law.prob(j)) << "\n";
    return 0;
  }
  if (quantity == "survival") {
    ProbDist mu = parse_mu_spec(mu_spec, gen.n_states());
    SimEstimate est = estimate_survival(gen, mu, t, cfg);
    write_estimates_csv(sink.stream(), {{"survival", 0, 0, est, cfg.seed}});
    return 0;
  }
  if (quantity == "eta") {
    const BirthDeathModel& m = need_bd(mi, "simulate --quantity eta");
    BoundsReport rep = certificate(m);
    double eta = eta_bound({rep.U, rep.B, rep.T, rep.p, K, t});
    double tmin = eta_minimizer(rep.U, rep.B, rep.T, rep.p, K);
    sink.stream() << "eta=" << format_sig12(eta) << "\n";
    sink.stream() << "eta_min_t=" << format_sig12(tmin) << "\n";
    sink.stream() << "eta_min=" << format_sig12(eta_bound({rep.U, rep.B, rep.T, rep.p, K, tmin}))
                  << "\n";
    sink.stream() << "window_lo=" << format_sig12(rep.B * rep.B * rep.T / rep.p) << "\n";
    sink.stream() << "window_hi=" << format_sig12(rep.U > 0 ? 1.0 / rep.U : kInf) << "\n";
    return 0;
  }
  throw QsdError(ErrKind::InvalidParams, "unknown quantity `" + quantity + "`");
}

int run_compare(const std::string& model, const std::string& mu_spec, double tol,
                int max_iter, bool do_assert, const std::string& output) {
  ModelInput mi = read_model_file(model);
  const BirthDeathModel& m = need_bd(mi, "compare");
  const Generator& gen = mi.generator();
  ProbDist mu = parse_mu_spec(mu_spec, gen.n_states());

  BoundsReport rep = certificate(m);
  ProbDist pim = pi_mu(gen, mu);
  auto [qsd_res, trace] = iterate_return_map(gen, mu, tol, max_iter);
  double d = tv_distance(qsd_res.m, pim);

  OutputSink sink(output);
  sink.stream() << "d_tv=" << format_sig12(d) << "\n";
  sink.stream() << "contraction=" << format_sig12(rep.contraction) << "\n";
  sink.stream() << "certificate_valid=" << (rep.certificate_valid ? "true" : "false")
                << "\n";
  bool holds = d <= rep.contraction + 1e-10;
  sink.stream() << "holds=" << (holds ? "true" : "false") << "\n";

  if (do_assert && !rep.certificate_valid) return 2;
  if (do_assert && !holds) return 1;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  std::setlocale(LC_NUMERIC, "C");
  CLI::App app{"quasi-stationary distributions of absorbing chains via the return map"};
  app.require_subcommand(1);

  std::string model, output, mu_spec = "delta1", quantity = "hit-prob";
  double tol = 1e-10, t = 1.0, K = 1.0;
  int max_iter = 0, state = 1, start = 1, target = 1, s1 = 0, s2 = 0;
  bool do_assert = false;
  SimConfig cfg;

  auto add_model = [&](CLI::App* sub) {
    sub->add_option("--model", model, "model or generator file")->required();
    sub->add_option("--output,-o", output, "output path (default stdout)");
  };

  CLI::App* bounds = app.add_subcommand("bounds", "certificate p, T, U, B, 2UT/p");
  add_model(bounds);
  bounds->add_option("--s1", s1, "lower pivot for quick bounds");
  bounds->add_option("--s2", s2, "upper pivot for quick bounds");

  CLI::App* qsd_cmd = app.add_subcommand("qsd", "QSD by iteration and spectral oracle");
  add_model(qsd_cmd);
  qsd_cmd->add_option("--mu", mu_spec, "return distribution (deltaK|uniform|file)");
  qsd_cmd->add_option("--tol", tol, "TV tolerance");
  qsd_cmd->add_option("--max-iter", max_iter, "iteration cap (0 = 10N)");

  CLI::App* rdist = app.add_subcommand("return-dist", "stationary law of the return process");
  add_model(rdist);
  rdist->add_option("--mu", mu_spec, "return distribution");

  CLI::App* iter = app.add_subcommand("iterate", "residual trace of the return map");
  add_model(iter);
  iter->add_option("--mu", mu_spec, "starting distribution");
  iter->add_option("--tol", tol, "TV tolerance");
  iter->add_option("--max-iter", max_iter, "iteration cap (0 = 10N)");

  CLI::App* stein = app.add_subcommand("stein", "Stein solve for an indicator function");
  add_model(stein);
  stein->add_option("--mu", mu_spec, "return distribution");
  stein->add_option("--state", state, "indicator state for f")->required();

  CLI::App* sim = app.add_subcommand("simulate", "Monte-Carlo estimates");
  add_model(sim);
  sim->add_option("--quantity", quantity,
                  "hit-prob|mean-time|occupation|law-at-t|survival|eta");
  sim->add_option("--start", start, "starting state");
  sim->add_option("--target", target, "target state");
  sim->add_option("--t", t, "time horizon for law-at-t/survival/eta");
  sim->add_option("--mu", mu_spec, "return/start distribution");
  sim->add_option("--K", K, "constant K in the eta bound");
  sim->add_option("--replicates", cfg.replicates, "number of replicates");
  sim->add_option("--seed", cfg.seed, "RNG seed");
  sim->add_option("--stream", cfg.stream_id, "RNG substream id");
  sim->add_option("--t-max", cfg.t_max, "simulation horizon");
  sim->add_option("--burn-in", cfg.burn_in_frac, "occupation burn-in fraction");
  sim->add_option("--threads", cfg.threads, "worker threads (0 = auto)");

  CLI::App* cmp = app.add_subcommand("compare", "d_TV(m, pi^mu) against 2UT/p");
  add_model(cmp);
  cmp->add_option("--mu", mu_spec, "return distribution");
  cmp->add_option("--tol", tol, "TV tolerance");
  cmp->add_option("--max-iter", max_iter, "iteration cap (0 = 10N)");
  cmp->add_flag("--assert", do_assert, "exit 2 when the certificate is invalid");

  CLI11_PARSE(app, argc, argv);

  try {
    if (bounds->parsed()) return run_bounds(model, output, s1, s2);
    if (qsd_cmd->parsed()) return run_qsd(model, mu_spec, tol, max_iter, output);
    if (rdist->parsed()) return run_return_dist(model, mu_spec, output);
    if (iter->parsed()) return run_iterate(model, mu_spec, tol, max_iter, output);
    if (stein->parsed()) return run_stein(model, mu_spec, state, output);
    if (sim->parsed())
      return run_simulate(model, quantity, start, target, t, mu_spec, K, cfg, output);
    if (cmp->parsed()) return run_compare(model, mu_spec, tol, max_iter, do_assert, output);
  } catch (const qsd::QsdError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
