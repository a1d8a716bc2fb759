#include "qsd/generator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "qsd/linalg.hpp"
#include "qsd/numerics.hpp"

namespace qsd {

namespace {

std::string state_str(int i) { return std::to_string(i); }

/// Predecessor lists over C: preds[j-1] holds all i with q_{ij} > 0.
std::vector<std::vector<int>> predecessors(const Generator& gen) {
  std::vector<std::vector<int>> preds(static_cast<size_t>(gen.n_states()));
  for (int i = 1; i <= gen.n_states(); ++i)
    for (const RateEntry& e : gen.row(i))
      if (e.target != 0) preds[static_cast<size_t>(e.target) - 1].push_back(i);
  return preds;
}

/// Backward closure: all states of C that can reach `seeds` via states where
/// `through` holds (seeds themselves need not satisfy `through`).
std::vector<char> backward_reach(const Generator& gen, const std::vector<int>& seeds,
                                 const std::vector<char>& through) {
  auto preds = predecessors(gen);
  std::vector<char> reach(static_cast<size_t>(gen.n_states()), 0);
  std::deque<int> queue;
  for (int s : seeds) {
    if (!reach[static_cast<size_t>(s) - 1]) {
      reach[static_cast<size_t>(s) - 1] = 1;
      queue.push_back(s);
    }
  }
  while (!queue.empty()) {
    int j = queue.front();
    queue.pop_front();
    for (int i : preds[static_cast<size_t>(j) - 1]) {
      size_t idx = static_cast<size_t>(i) - 1;
      if (!reach[idx] && through[idx]) {
        reach[idx] = 1;
        queue.push_back(i);
      }
    }
  }
  return reach;
}

struct InteriorSolve {
  std::vector<int> states;      // ascending
  std::vector<double> values;   // aligned with states
};

/// Solves q_k x_k - sum_{j in states} q_{kj} x_j = rhs(k) over the given
/// interior states.  Uses per-run Thomas sweeps when the generator is
/// tridiagonal (runs decouple because their separators are boundary states),
/// dense LU otherwise.
InteriorSolve solve_interior(const Generator& gen, const std::vector<int>& states,
                             const std::vector<double>& rhs_by_state) {
  InteriorSolve out;
  out.states = states;
  out.values.assign(states.size(), 0.0);
  if (states.empty()) return out;

  if (gen.tridiagonal()) {
    size_t pos = 0;
    while (pos < states.size()) {
      size_t end = pos + 1;
      while (end < states.size() && states[end] == states[end - 1] + 1) ++end;
      size_t len = end - pos;
      std::vector<double> lower(len, 0.0), diag(len, 0.0), upper(len, 0.0), rhs(len, 0.0);
      for (size_t r = 0; r < len; ++r) {
        int k = states[pos + r];
        diag[r] = gen.exit_rate(k);
        rhs[r] = rhs_by_state[static_cast<size_t>(k) - 1];
        for (const RateEntry& e : gen.row(k)) {
          if (r > 0 && e.target == k - 1) lower[r] = -e.rate;
          if (r + 1 < len && e.target == k + 1) upper[r] = -e.rate;
        }
      }
      auto x = solve_tridiagonal(std::move(lower), std::move(diag), std::move(upper),
                                 std::move(rhs));
      for (size_t r = 0; r < len; ++r) out.values[pos + r] = x[r];
      pos = end;
    }
    return out;
  }

  size_t n = states.size();
  std::vector<int> col_of(static_cast<size_t>(gen.n_states()) + 1, -1);
  for (size_t c = 0; c < n; ++c) col_of[static_cast<size_t>(states[c])] = static_cast<int>(c);
  std::vector<double> a(n * n, 0.0), rhs(n, 0.0);
  for (size_t r = 0; r < n; ++r) {
    int k = states[r];
    a[r * n + r] = gen.exit_rate(k);
    rhs[r] = rhs_by_state[static_cast<size_t>(k) - 1];
    for (const RateEntry& e : gen.row(k)) {
      if (e.target == 0) continue;
      int c = col_of[static_cast<size_t>(e.target)];
      if (c >= 0) a[r * n + static_cast<size_t>(c)] -= e.rate;
    }
  }
  out.values = solve_dense(std::move(a), std::move(rhs));
  return out;
}

std::vector<int> checked_state_set(const std::vector<int>& set, int n,
                                   const char* what) {
  std::vector<int> s = set;
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  for (int k : s)
    if (k < 0 || k > n)
      throw QsdError(ErrKind::IndexOutOfRange,
                     std::string(what) + " state " + state_str(k) + " outside 0.." +
                         state_str(n));
  return s;
}

}  // namespace

Generator Generator::build(const std::vector<RateTriple>& triples, int n_states,
                           bool require_absorption, bool require_exit) {
  if (n_states < 1)
    throw QsdError(ErrKind::InvalidParams, "n_states must be positive");

  std::map<std::pair<int, int>, double> merged;
  for (const RateTriple& t : triples) {
    if (t.from < 1 || t.from > n_states || t.to < 0 || t.to > n_states)
      throw QsdError(ErrKind::IndexOutOfRange,
                     "rate (" + state_str(t.from) + " -> " + state_str(t.to) +
                         ") outside state space 1.." + state_str(n_states));
    if (t.from == t.to)
      throw QsdError(ErrKind::SelfRate, "self rate at state " + state_str(t.from));
    if (!std::isfinite(t.rate) || t.rate < 0.0)
      throw QsdError(ErrKind::NegativeRate,
                     "rate (" + state_str(t.from) + " -> " + state_str(t.to) +
                         ") = " + std::to_string(t.rate));
    if (t.rate == 0.0) continue;
    merged[{t.from, t.to}] += t.rate;
  }

  Generator g;
  g.n_ = n_states;
  g.offsets_.assign(static_cast<size_t>(n_states) + 1, 0);
  g.exit_.assign(static_cast<size_t>(n_states), 0.0);
  g.absorb_.assign(static_cast<size_t>(n_states), 0.0);
  g.entries_.reserve(merged.size());

  // map keys sort by (from, to), so entries arrive row-grouped and
  // target-sorted; offsets_[r] records the end of row r.
  int row = 1;
  for (const auto& [key, rate] : merged) {
    auto [i, j] = key;
    while (row < i) g.offsets_[static_cast<size_t>(row++)] = g.entries_.size();
    g.entries_.push_back({j, rate});
    g.exit_[static_cast<size_t>(i) - 1] += rate;
    if (j == 0)
      g.absorb_[static_cast<size_t>(i) - 1] += rate;
    else if (std::abs(i - j) > 1)
      g.tridiagonal_ = false;
  }
  while (row <= n_states) g.offsets_[static_cast<size_t>(row++)] = g.entries_.size();
  for (int i = 1; i <= n_states; ++i) {
    double q = g.exit_[static_cast<size_t>(i) - 1];
    if (require_exit && !(q > 0.0))
      throw QsdError(ErrKind::ZeroExitRate, "state " + state_str(i) + " has no exit rate");
    if (q > g.max_exit_) g.max_exit_ = q;
  }
  if (require_absorption && !(g.total_absorption() > 0.0))
    throw QsdError(ErrKind::NoAbsorption, "no state has a positive rate to 0");
  return g;
}

Generator Generator::validate(const std::vector<RateTriple>& triples, int n_states) {
  return build(triples, n_states, /*require_absorption=*/true, /*require_exit=*/true);
}

Generator Generator::conservative(const std::vector<RateTriple>& triples, int n_states) {
  return build(triples, n_states, /*require_absorption=*/false, /*require_exit=*/false);
}

double Generator::total_absorption() const {
  KahanSum acc;
  for (double q : absorb_) acc.add(q);
  return acc.value();
}

Generator return_generator(const Generator& gen, const ProbDist& mu) {
  if (mu.size() != gen.n_states())
    throw QsdError(ErrKind::DimensionMismatch,
                   "mu has " + state_str(mu.size()) + " states, generator has " +
                       state_str(gen.n_states()));
  std::vector<RateTriple> triples;
  for (int i = 1; i <= gen.n_states(); ++i) {
    double qi0 = gen.absorption_rate(i);
    for (const RateEntry& e : gen.row(i))
      if (e.target != 0) triples.push_back({i, e.target, e.rate});
    if (qi0 > 0.0) {
      for (int j = 1; j <= gen.n_states(); ++j) {
        if (j == i) continue;  // returning to the current state is no event
        double add = qi0 * mu.prob(j);
        if (add > 0.0) triples.push_back({i, j, add});
      }
    }
  }
  return Generator::conservative(triples, gen.n_states());
}

std::vector<double> hit_probability(const Generator& gen, const HittingSpec& spec) {
  int n = gen.n_states();
  auto target = checked_state_set(spec.target, n, "target");
  auto avoid = checked_state_set(spec.avoid, n, "avoid");
  if (target.empty())
    throw QsdError(ErrKind::InvalidParams, "empty target set");
  for (int k : avoid)
    if (std::binary_search(target.begin(), target.end(), k))
      throw QsdError(ErrKind::InvalidParams,
                     "state " + state_str(k) + " in both target and avoid sets");

  bool cemetery_in_target = std::binary_search(target.begin(), target.end(), 0);
  std::vector<char> is_boundary(static_cast<size_t>(n) + 1, 0);
  for (int k : target) is_boundary[static_cast<size_t>(k)] = 1;
  for (int k : avoid) is_boundary[static_cast<size_t>(k)] = 1;

  std::vector<int> interior;
  std::vector<char> through(static_cast<size_t>(n), 0);
  for (int k = 1; k <= n; ++k)
    if (!is_boundary[static_cast<size_t>(k)]) {
      interior.push_back(k);
      through[static_cast<size_t>(k) - 1] = 1;
    }

  // A state that can reach no boundary at all (not even the cemetery) sits
  // in a conservative block, where the linear system is singular.  Seeds are
  // the boundary states of C plus every interior state exiting to 0.
  std::vector<int> seeds;
  for (int k = 1; k <= n; ++k)
    if (is_boundary[static_cast<size_t>(k)]) seeds.push_back(k);
  for (int k : interior)
    if (gen.absorption_rate(k) > 0.0) seeds.push_back(k);
  auto reach = backward_reach(gen, seeds, through);
  for (int k : interior)
    if (!reach[static_cast<size_t>(k) - 1])
      throw QsdError(ErrKind::SingularSystem,
                     "state " + state_str(k) + " cannot reach the boundary");

  std::vector<double> rhs(static_cast<size_t>(n), 0.0);
  for (int k : interior) {
    double r = 0.0;
    for (const RateEntry& e : gen.row(k)) {
      if (e.target == 0 && cemetery_in_target)
        r += e.rate;
      else if (e.target != 0 &&
               std::binary_search(target.begin(), target.end(), e.target))
        r += e.rate;
    }
    rhs[static_cast<size_t>(k) - 1] = r;
  }

  auto sol = solve_interior(gen, interior, rhs);

  std::vector<double> h(static_cast<size_t>(n), 0.0);
  for (int k : target)
    if (k != 0) h[static_cast<size_t>(k) - 1] = 1.0;
  for (size_t idx = 0; idx < sol.states.size(); ++idx) {
    double v = sol.values[idx];
    h[static_cast<size_t>(sol.states[idx]) - 1] = std::min(1.0, std::max(0.0, v));
  }
  return h;
}

std::vector<double> mean_hitting_time(const Generator& gen,
                                      const std::vector<int>& target_set) {
  int n = gen.n_states();
  auto target = checked_state_set(target_set, n, "target");
  if (target.empty())
    throw QsdError(ErrKind::InvalidParams, "empty target set");
  bool cemetery_in_target = std::binary_search(target.begin(), target.end(), 0);

  std::vector<char> in_target(static_cast<size_t>(n) + 1, 0);
  for (int k : target) in_target[static_cast<size_t>(k)] = 1;

  std::vector<int> interior;
  std::vector<char> through(static_cast<size_t>(n), 0);
  for (int k = 1; k <= n; ++k)
    if (!in_target[static_cast<size_t>(k)]) {
      interior.push_back(k);
      through[static_cast<size_t>(k) - 1] = 1;
    }

  // Interior states that can reach the cemetery without touching the target
  // have infinite expected hitting time when 0 is not a target.
  std::vector<char> divergent(static_cast<size_t>(n), 0);
  if (!cemetery_in_target) {
    std::vector<int> seeds;
    for (int k : interior)
      if (gen.absorption_rate(k) > 0.0) seeds.push_back(k);
    divergent = backward_reach(gen, seeds, through);
  }

  std::vector<int> good;
  std::vector<char> good_mask(static_cast<size_t>(n), 0);
  for (int k : interior)
    if (!divergent[static_cast<size_t>(k) - 1]) {
      good.push_back(k);
      good_mask[static_cast<size_t>(k) - 1] = 1;
    }

  // Every good state must reach the target (it cannot reach 0, so a failure
  // means a conservative block: the system is singular).
  {
    std::vector<int> seeds;
    for (int k : good)
      for (const RateEntry& e : gen.row(k))
        if (e.target != 0 && in_target[static_cast<size_t>(e.target)]) {
          seeds.push_back(k);
          break;
        }
    auto reach = backward_reach(gen, seeds, good_mask);
    for (int k : good)
      if (!reach[static_cast<size_t>(k) - 1])
        throw QsdError(ErrKind::SingularSystem,
                       "state " + state_str(k) +
                           " can reach neither the target set nor the cemetery");
  }

  std::vector<double> rhs(static_cast<size_t>(n), 1.0);
  auto sol = solve_interior(gen, good, rhs);

  std::vector<double> t(static_cast<size_t>(n), 0.0);
  for (int k : interior) t[static_cast<size_t>(k) - 1] = kInf;
  for (size_t idx = 0; idx < sol.states.size(); ++idx)
    t[static_cast<size_t>(sol.states[idx]) - 1] = std::max(0.0, sol.values[idx]);

  // Return-time convention for starts inside the target: one jump out plus
  // the expected re-entry time from wherever the jump lands.
  for (int k : target) {
    if (k == 0) continue;
    double acc = 1.0;  // q_k * (holding time)
    bool inf = false;
    for (const RateEntry& e : gen.row(k)) {
      if (e.target == 0) {
        if (!cemetery_in_target) inf = true;  // trapped, never re-enters
        continue;
      }
      if (in_target[static_cast<size_t>(e.target)]) continue;  // arrives at 0 cost
      double tj = t[static_cast<size_t>(e.target) - 1];
      if (tj == kInf) {
        inf = true;
        continue;
      }
      acc += e.rate * tj;
    }
    t[static_cast<size_t>(k) - 1] = inf ? kInf : acc / gen.exit_rate(k);
  }
  return t;
}

Generator read_generator(std::istream& in) {
  std::vector<RateTriple> triples;
  int n = -1;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first)) continue;  // blank or comment-only
    if (n < 0) {
      if (first.rfind("n=", 0) != 0)
        throw QsdError(ErrKind::ParseError,
                       "line " + std::to_string(lineno) + ": expected n=<N> header");
      try {
        n = std::stoi(first.substr(2));
      } catch (const std::exception&) {
        throw QsdError(ErrKind::ParseError,
                       "line " + std::to_string(lineno) + ": bad state count");
      }
      continue;
    }
    RateTriple t{};
    std::istringstream row(line);
    if (!(row >> t.from >> t.to >> t.rate))
      throw QsdError(ErrKind::ParseError,
                     "line " + std::to_string(lineno) + ": expected `i j rate`");
    std::string tail;
    if (row >> tail)
      throw QsdError(ErrKind::ParseError,
                     "line " + std::to_string(lineno) + ": trailing content `" + tail + "`");
    triples.push_back(t);
  }
  if (n < 0) throw QsdError(ErrKind::ParseError, "missing n=<N> header");
  return Generator::validate(triples, n);
}

void write_generator(std::ostream& out, const Generator& gen) {
  out << "n=" << gen.n_states() << "\n";
  char buf[64];
  for (int i = 1; i <= gen.n_states(); ++i) {
    for (const RateEntry& e : gen.row(i)) {
      std::snprintf(buf, sizeof buf, "%d %d %.17g", i, e.target, e.rate);
      out << buf << "\n";
    }
  }
}

}  // namespace qsd
