#include "qsd/bd_model.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qsd/numerics.hpp"

namespace qsd {

namespace {

// Suffix log-sums of alpha: suffix[j-1] = log sum_{i>=j} alpha_i.
std::vector<double> alpha_suffix_logsums(const AlphaWeights& aw) {
  size_t n = aw.log_alpha.size();
  std::vector<double> suffix(n);
  double acc = -kInf;
  for (size_t j = n; j-- > 0;) {
    acc = log_add_exp(acc, aw.log_alpha[j]);
    suffix[j] = acc;
  }
  return suffix;
}

std::vector<double> alpha_prefix_logsums(const AlphaWeights& aw) {
  size_t n = aw.log_alpha.size();
  std::vector<double> prefix(n);
  double acc = -kInf;
  for (size_t j = 0; j < n; ++j) {
    acc = log_add_exp(acc, aw.log_alpha[j]);
    prefix[j] = acc;
  }
  return prefix;
}

bool tail_certified(const TruncationNote& note) {
  return note.kind == Truncation::ExactFinite ||
         (note.tail_alpha_ratio < 1.0 && std::isfinite(note.log_tail_mass_bound) &&
          std::isfinite(note.d_tail_sum_bound));
}

}  // namespace

BirthDeathModel BirthDeathModel::create(std::vector<double> b, std::vector<double> d,
                                        TruncationNote note) {
  if (b.empty() || b.size() != d.size())
    throw QsdError(ErrKind::InvalidParams, "birth/death arrays empty or of unequal length");
  size_t n = b.size();
  for (size_t j = 0; j < n; ++j) {
    if (!std::isfinite(b[j]) || !std::isfinite(d[j]))
      throw QsdError(ErrKind::InvalidParams, "non-finite rate at state " + std::to_string(j + 1));
    if (d[j] <= 0.0)
      throw QsdError(ErrKind::InvalidParams, "death rate must be positive at state " +
                                                 std::to_string(j + 1));
    bool last = (j + 1 == n);
    if (!last && b[j] <= 0.0)
      throw QsdError(ErrKind::InvalidParams, "birth rate must be positive at state " +
                                                 std::to_string(j + 1));
    if (last && b[j] != 0.0)
      throw QsdError(ErrKind::InvalidParams, "b_N must be zero (truncation boundary)");
  }
  return BirthDeathModel(std::move(b), std::move(d), note);
}

BirthDeathModel make_logistic(const LogisticParams& p, Truncation policy) {
  if (!(p.b > 0.0) || !(p.d > 0.0) || !(p.e > 0.0) || !(p.A > 0.0))
    throw QsdError(ErrKind::InvalidParams,
                   "logistic rates b, d, e and area A must all be positive");
  if (p.N < 2) throw QsdError(ErrKind::InvalidParams, "logistic truncation N must be >= 2");

  auto death = [&p](double i) { return p.d * i + p.e * i * i / p.A; };
  std::vector<double> b(static_cast<size_t>(p.N)), d(static_cast<size_t>(p.N));
  for (int i = 1; i <= p.N; ++i) {
    b[static_cast<size_t>(i) - 1] = (i == p.N) ? 0.0 : p.b * i;
    d[static_cast<size_t>(i) - 1] = death(i);
  }

  TruncationNote note;
  if (policy == Truncation::TruncatedInfinite) {
    note.kind = Truncation::TruncatedInfinite;
    // alpha ratio of the untruncated model at the edge; the ratios
    // b*j / d(j+1) decrease in j, so the edge value dominates the tail.
    double r = (p.b * p.N) / death(static_cast<double>(p.N) + 1.0);
    note.tail_alpha_ratio = r;
    if (r < 1.0) {
      double log_alpha_n = 0.0;  // log alpha_N of the untruncated model
      for (int l = 1; l < p.N; ++l)
        log_alpha_n += std::log(p.b * l) - std::log(death(static_cast<double>(l) + 1.0));
      note.log_tail_mass_bound = log_alpha_n + std::log(r / (1.0 - r));
      // sum_{j>N} 1/d_j <= sum_{j>N} A/(e j^2) <= A/(e N)
      note.d_tail_sum_bound = p.A / (p.e * p.N);
    } else {
      note.log_tail_mass_bound = kInf;
      note.d_tail_sum_bound = kInf;
    }
  }
  return BirthDeathModel::create(std::move(b), std::move(d), note);
}

BirthDeathModel make_sis(const SISParams& p) {
  if (!(p.lambda > 0.0) || !(p.mu > 0.0))
    throw QsdError(ErrKind::InvalidParams, "SIS rates lambda and mu must be positive");
  if (p.N < 2) throw QsdError(ErrKind::InvalidParams, "SIS population N must be >= 2");
  std::vector<double> b(static_cast<size_t>(p.N)), d(static_cast<size_t>(p.N));
  for (int i = 1; i <= p.N; ++i) {
    b[static_cast<size_t>(i) - 1] =
        p.lambda * i * (1.0 - static_cast<double>(i) / p.N);  // exactly 0 at i = N
    d[static_cast<size_t>(i) - 1] = p.mu * i;
  }
  return BirthDeathModel::create(std::move(b), std::move(d), {});
}

AlphaWeights alpha_weights(const BirthDeathModel& m) {
  int n = m.n_states();
  AlphaWeights aw;
  aw.log_alpha.resize(static_cast<size_t>(n));
  aw.log_alpha[0] = 0.0;
  for (int j = 2; j <= n; ++j)
    aw.log_alpha[static_cast<size_t>(j) - 1] =
        aw.log_alpha[static_cast<size_t>(j) - 2] + std::log(m.birth(j - 1)) -
        std::log(m.death(j));
  aw.log_alpha_plus = log_sum_exp(aw.log_alpha);
  return aw;
}

ProbDist return_dist_delta1(const BirthDeathModel& m) {
  if (!tail_certified(m.truncation()))
    throw QsdError(ErrKind::DivergentAlphaSum,
                   "alpha sum of the untruncated model has no finite certificate");
  AlphaWeights aw = alpha_weights(m);
  std::vector<double> mass(aw.log_alpha.size());
  for (size_t j = 0; j < mass.size(); ++j)
    mass[j] = std::exp(aw.log_alpha[j] - aw.log_alpha_plus);
  return ProbDist::normalized(std::move(mass));
}

SChoice choose_s(const BirthDeathModel& m) {
  int n = m.n_states();
  std::vector<double> ratio(static_cast<size_t>(n));
  for (int j = 1; j <= n; ++j)
    ratio[static_cast<size_t>(j) - 1] = m.birth(j) / m.death(j);

  bool monotone = true;
  for (int j = 1; j < n; ++j)
    if (ratio[static_cast<size_t>(j)] > ratio[static_cast<size_t>(j) - 1] * (1.0 + 1e-12)) {
      monotone = false;
      break;
    }

  if (!monotone) {
    AlphaWeights aw = alpha_weights(m);
    int s = 1 + static_cast<int>(std::max_element(aw.log_alpha.begin(), aw.log_alpha.end()) -
                                 aw.log_alpha.begin());
    return {s, SChoiceFlag::NonMonotoneRatio};
  }
  if (ratio[0] < 1.0) return {1, SChoiceFlag::MonotoneWarning};
  int s = 1;
  while (s < n && ratio[static_cast<size_t>(s)] >= 1.0) ++s;
  return {s, SChoiceFlag::Ok};
}

std::vector<double> hit_prob_closed_form(const BirthDeathModel& m, int s) {
  int n = m.n_states();
  if (s < 1 || s > n)
    throw QsdError(ErrKind::IndexOutOfRange, "s = " + std::to_string(s) + " outside 1..N");
  AlphaWeights aw = alpha_weights(m);

  std::vector<double> log_term(static_cast<size_t>(s));
  for (int j = 1; j <= s; ++j)
    log_term[static_cast<size_t>(j) - 1] =
        -std::log(m.death(j)) - aw.log_alpha[static_cast<size_t>(j) - 1];
  double hi = *std::max_element(log_term.begin(), log_term.end());

  std::vector<double> r(static_cast<size_t>(n), 1.0);
  KahanSum sigma;  // running sigma_k, normalized by e^{hi}
  std::vector<double> sigma_k(static_cast<size_t>(s));
  for (int k = 1; k <= s; ++k) {
    sigma.add(std::exp(log_term[static_cast<size_t>(k) - 1] - hi));
    sigma_k[static_cast<size_t>(k) - 1] = sigma.value();
  }
  for (int k = 1; k < s; ++k)
    r[static_cast<size_t>(k) - 1] =
        sigma_k[static_cast<size_t>(k) - 1] / sigma_k[static_cast<size_t>(s) - 1];
  return r;
}

double p_bound(const BirthDeathModel& m, int s) {
  int n = m.n_states();
  if (s < 1 || s > n)
    throw QsdError(ErrKind::IndexOutOfRange, "s = " + std::to_string(s) + " outside 1..N");
  AlphaWeights aw = alpha_weights(m);
  std::vector<double> log_term(static_cast<size_t>(s));
  for (int j = 1; j <= s; ++j)
    log_term[static_cast<size_t>(j) - 1] =
        -std::log(m.death(j)) - aw.log_alpha[static_cast<size_t>(j) - 1];
  double log_sigma_s = log_sum_exp(log_term);
  return std::min(1.0, std::exp(-(std::log(m.death(1)) + log_sigma_s)));
}

TBounds t_bounds(const BirthDeathModel& m, int s) {
  int n = m.n_states();
  if (s < 1 || s > n)
    throw QsdError(ErrKind::IndexOutOfRange, "s = " + std::to_string(s) + " outside 1..N");
  const TruncationNote& note = m.truncation();
  if (!tail_certified(note))
    throw QsdError(ErrKind::DSeriesDivergent,
                   "no geometric domination at the truncation edge: the D series "
                   "of the untruncated model cannot be certified");

  AlphaWeights aw = alpha_weights(m);
  auto prefix = alpha_prefix_logsums(aw);
  auto suffix = alpha_suffix_logsums(aw);
  bool truncated = note.kind == Truncation::TruncatedInfinite;

  auto log_alpha = [&aw](int j) { return aw.log_alpha[static_cast<size_t>(j) - 1]; };

  // climb bound sum_{i=k}^{s-1} (1/(b_i alpha_i)) sum_{j<=i} alpha_j
  std::vector<double> climb_log(static_cast<size_t>(s) - 1);
  for (int i = 1; i < s; ++i)
    climb_log[static_cast<size_t>(i) - 1] =
        prefix[static_cast<size_t>(i) - 1] - std::log(m.birth(i)) - log_alpha(i);
  double climb_full = sum_exp(climb_log);
  double climb_last = s >= 2 ? std::exp(climb_log[static_cast<size_t>(s) - 2]) : 0.0;

  // exact downhill first-step series E_{s+1} tau_s (with certified tail)
  double down_first = 0.0;
  if (s < n) {
    double log_suffix = suffix[static_cast<size_t>(s)];
    if (truncated) log_suffix = log_add_exp(log_suffix, note.log_tail_mass_bound);
    down_first = std::exp(log_suffix - std::log(m.death(s + 1)) - log_alpha(s + 1));
  }

  // return time at s: one jump out plus the dominating re-entry bounds
  double qs = m.exit(s);
  double return_at_s = (1.0 + m.birth(s) * down_first + m.death(s) * climb_last) / qs;
  double t1 = std::max(climb_full, return_at_s);

  // D series T2 = sum_{j>s} (1/(d_j alpha_j)) sum_{i>=j} alpha_i
  std::vector<double> d_log(static_cast<size_t>(n - s));
  for (int j = s + 1; j <= n; ++j) {
    double log_suffix = suffix[static_cast<size_t>(j) - 1];
    if (truncated) log_suffix = log_add_exp(log_suffix, note.log_tail_mass_bound);
    d_log[static_cast<size_t>(j - s) - 1] =
        log_suffix - std::log(m.death(j)) - log_alpha(j);
  }
  double t2 = sum_exp(d_log);
  if (truncated) {
    // terms beyond N: t_j <= 1/(d_j (1 - r)), summed via the d-tail bound
    t2 += note.d_tail_sum_bound / (1.0 - note.tail_alpha_ratio);
  }

  return {t1, t2, std::max(t1, t2)};
}

double u_exact(const BirthDeathModel& m) {
  if (!tail_certified(m.truncation()))
    throw QsdError(ErrKind::DivergentAlphaSum,
                   "alpha sum of the untruncated model has no finite certificate");
  AlphaWeights aw = alpha_weights(m);
  return m.death(1) * std::exp(-aw.log_alpha_plus);
}

BoundsReport certificate(const BirthDeathModel& m) {
  BoundsReport rep;
  SChoice sc = choose_s(m);
  rep.s = sc.s;
  rep.s_flag = sc.flag;
  rep.p = p_bound(m, sc.s);

  try {
    TBounds tb = t_bounds(m, sc.s);
    rep.T1 = tb.T1;
    rep.T2 = tb.T2;
    rep.T = tb.T;
  } catch (const QsdError& e) {
    rep.reason = e.what();
    rep.certificate_valid = false;
    return rep;
  }

  AlphaWeights aw = alpha_weights(m);
  rep.log_u = std::log(m.death(1)) - aw.log_alpha_plus;
  rep.U = std::exp(rep.log_u);
  rep.B = rep.T * m.exit(rep.s) / rep.p;
  rep.log_contraction =
      std::log(2.0) + rep.log_u + std::log(rep.T) - std::log(rep.p);
  rep.contraction = std::exp(rep.log_contraction);
  rep.certificate_valid = rep.log_contraction < 0.0;
  if (!rep.certificate_valid) rep.reason = "contraction 2UT/p is not below 1";
  return rep;
}

QuickBounds quick_bounds(const BirthDeathModel& m, int s1, int s2) {
  int n = m.n_states();
  SChoice sc = choose_s(m);
  if (sc.flag != SChoiceFlag::Ok || m.birth(1) / m.death(1) <= 1.0)
    throw QsdError(ErrKind::AssumptionViolated, "need decreasing b_j/d_j with b_1/d_1 > 1");
  for (int j = 1; j < n; ++j)
    if (m.death(j + 1) < m.death(j) * (1.0 - 1e-12))
      throw QsdError(ErrKind::AssumptionViolated, "death rates must be increasing");
  if (s1 < 1 || s1 > sc.s || s2 <= sc.s || s2 > n)
    throw QsdError(ErrKind::AssumptionViolated,
                   "need 1 <= s1 <= s < s2 <= N (s = " + std::to_string(sc.s) + ")");

  double rho1 = m.birth(s1) / m.death(s1);
  double rho2 = m.birth(s2) / m.death(s2);
  if (rho1 <= 1.0 || rho2 >= 1.0)
    throw QsdError(ErrKind::AssumptionViolated, "need b_{s1}/d_{s1} > 1 > b_{s2}/d_{s2}");

  double rho1_pow = std::exp(-s1 * std::log(rho1));  // rho_1^{-s1}

  QuickBounds qb{};
  qb.p_lo = (rho1 - 1.0) / rho1 / (1.0 + (sc.s - s1) * rho1_pow);
  qb.U_hi = m.death(s1) * (rho1 - 1.0) * rho1_pow;

  KahanSum inv_d;
  for (int j = sc.s + 1; j <= n; ++j) inv_d.add(1.0 / m.death(j));
  double inv_d_sum = inv_d.value();
  if (m.truncation().kind == Truncation::TruncatedInfinite)
    inv_d_sum += m.truncation().d_tail_sum_bound;
  qb.T2_hi = (s2 - sc.s + 1.0 / (1.0 - rho2)) * inv_d_sum;

  KahanSum inv_b;
  for (int i = 1; i < sc.s; ++i) inv_b.add(1.0 / m.birth(i));
  qb.T1_hi = (sc.s - s1 + rho1 / (rho1 - 1.0)) * inv_b.value();
  return qb;
}

double mean_upcross_time(const BirthDeathModel& m, int i) {
  if (i < 2 || i > m.n_states())
    throw QsdError(ErrKind::IndexOutOfRange,
                   "upcross index " + std::to_string(i) + " outside 2..N");
  AlphaWeights aw = alpha_weights(m);
  auto suffix = alpha_suffix_logsums(aw);
  return std::exp(suffix[static_cast<size_t>(i) - 1] - std::log(m.death(i)) -
                  aw.log_alpha[static_cast<size_t>(i) - 1]);
}

Generator to_generator(const BirthDeathModel& m) {
  std::vector<RateTriple> triples;
  int n = m.n_states();
  triples.reserve(2 * static_cast<size_t>(n));
  for (int i = 1; i <= n; ++i) {
    if (i < n) triples.push_back({i, i + 1, m.birth(i)});
    triples.push_back({i, i - 1, m.death(i)});  // i = 1 exits to the cemetery
  }
  return Generator::validate(triples, n);
}

}  // namespace qsd
