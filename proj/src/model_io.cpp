#include "qsd/model_io.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace qsd {

namespace {

std::string trim(const std::string& s) {
  size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

[[noreturn]] void parse_fail(int lineno, const std::string& what) {
  throw QsdError(ErrKind::ParseError, "line " + std::to_string(lineno) + ": " + what);
}

double parse_double(const std::string& v, int lineno) {
  try {
    size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size()) parse_fail(lineno, "trailing content in number `" + v + "`");
    return x;
  } catch (const QsdError&) {
    throw;
  } catch (const std::exception&) {
    parse_fail(lineno, "bad number `" + v + "`");
  }
}

int parse_int(const std::string& v, int lineno) {
  try {
    size_t pos = 0;
    int x = std::stoi(v, &pos);
    if (pos != v.size()) parse_fail(lineno, "trailing content in integer `" + v + "`");
    return x;
  } catch (const QsdError&) {
    throw;
  } catch (const std::exception&) {
    parse_fail(lineno, "bad integer `" + v + "`");
  }
}

std::vector<double> parse_vec(const std::string& v, int lineno) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_double(trim(item), lineno));
  if (out.empty()) parse_fail(lineno, "empty vector");
  return out;
}

struct KeyLine {
  std::string value;
  int lineno;
};

std::map<std::string, KeyLine> read_keyvals(std::istream& in) {
  std::map<std::string, KeyLine> kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::string t = trim(line);
    if (t.empty()) continue;
    auto eq = t.find('=');
    if (eq == std::string::npos) parse_fail(lineno, "expected key=value, got `" + t + "`");
    std::string key = trim(t.substr(0, eq));
    std::string val = trim(t.substr(eq + 1));
    if (key.empty() || val.empty()) parse_fail(lineno, "empty key or value");
    if (kv.count(key)) parse_fail(lineno, "duplicate key `" + key + "`");
    kv[key] = {val, lineno};
  }
  return kv;
}

const KeyLine& need(const std::map<std::string, KeyLine>& kv, const std::string& key) {
  auto it = kv.find(key);
  if (it == kv.end())
    throw QsdError(ErrKind::ParseError, "missing required key `" + key + "`");
  return it->second;
}

void reject_unknown(const std::map<std::string, KeyLine>& kv,
                    std::initializer_list<const char*> allowed) {
  for (const auto& [key, val] : kv) {
    bool ok = false;
    for (const char* a : allowed)
      if (key == a) ok = true;
    if (!ok) parse_fail(val.lineno, "unknown key `" + key + "`");
  }
}

}  // namespace

const Generator& ModelInput::generator() const {
  if (gen) return *gen;
  throw QsdError(ErrKind::InvalidParams, "model input carries no generator");
}

BirthDeathModel read_bd_model(std::istream& in) {
  auto kv = read_keyvals(in);
  const KeyLine& kind = need(kv, "kind");

  if (kind.value == "logistic") {
    reject_unknown(kv, {"kind", "b", "d", "e", "A", "N", "truncation"});
    LogisticParams p{};
    p.b = parse_double(need(kv, "b").value, need(kv, "b").lineno);
    p.d = parse_double(need(kv, "d").value, need(kv, "d").lineno);
    p.e = parse_double(need(kv, "e").value, need(kv, "e").lineno);
    p.A = parse_double(need(kv, "A").value, need(kv, "A").lineno);
    p.N = parse_int(need(kv, "N").value, need(kv, "N").lineno);
    Truncation policy = Truncation::TruncatedInfinite;
    if (auto it = kv.find("truncation"); it != kv.end()) {
      if (it->second.value == "exact")
        policy = Truncation::ExactFinite;
      else if (it->second.value == "certified")
        policy = Truncation::TruncatedInfinite;
      else
        parse_fail(it->second.lineno, "truncation must be exact|certified");
    }
    return make_logistic(p, policy);
  }
  if (kind.value == "sis") {
    reject_unknown(kv, {"kind", "lambda", "mu", "N"});
    SISParams p{};
    p.lambda = parse_double(need(kv, "lambda").value, need(kv, "lambda").lineno);
    p.mu = parse_double(need(kv, "mu").value, need(kv, "mu").lineno);
    p.N = parse_int(need(kv, "N").value, need(kv, "N").lineno);
    return make_sis(p);
  }
  if (kind.value == "custom") {
    reject_unknown(kv, {"kind", "bvec", "dvec"});
    auto b = parse_vec(need(kv, "bvec").value, need(kv, "bvec").lineno);
    auto d = parse_vec(need(kv, "dvec").value, need(kv, "dvec").lineno);
    if (b.size() != d.size())
      parse_fail(need(kv, "dvec").lineno, "bvec and dvec have different lengths");
    return BirthDeathModel::create(std::move(b), std::move(d), {});
  }
  parse_fail(kind.lineno, "kind must be logistic|sis|custom");
}

ModelInput read_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in)
    throw QsdError(ErrKind::ParseError, "cannot open model file `" + path + "`");

  // sniff: bd definitions start with kind=, generator files with n=
  std::string line;
  std::string first;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    first = trim(line);
    if (!first.empty()) break;
  }
  in.clear();
  in.seekg(0);

  ModelInput mi;
  if (first.rfind("kind", 0) == 0) {
    mi.bd = read_bd_model(in);
    mi.gen = to_generator(*mi.bd);
  } else {
    mi.gen = read_generator(in);
  }
  return mi;
}

ProbDist parse_mu_spec(const std::string& spec, int n_states) {
  if (spec == "uniform") return ProbDist::uniform(n_states);
  if (spec.rfind("delta", 0) == 0) {
    const std::string num = spec.substr(5);
    try {
      size_t pos = 0;
      int k = std::stoi(num, &pos);
      if (pos == num.size()) return ProbDist::delta(k, n_states);
    } catch (const std::exception&) {
    }
    throw QsdError(ErrKind::ParseError, "bad mu spec `" + spec + "` (want deltaK)");
  }
  std::ifstream in(spec);
  if (!in)
    throw QsdError(ErrKind::ParseError, "cannot open mu file `" + spec + "`");
  return read_distribution(in, n_states);
}

void write_distribution(std::ostream& out, const ProbDist& dist,
                        const std::vector<std::pair<std::string, std::string>>& header) {
  for (const auto& [k, v] : header) out << "# " << k << ": " << v << "\n";
  for (int j = 1; j <= dist.size(); ++j)
    out << j << " " << format_sig12(dist.prob(j)) << "\n";
}

ProbDist read_distribution(std::istream& in, int n_states) {
  std::vector<double> mass(static_cast<size_t>(n_states), 0.0);
  std::string line;
  int lineno = 0;
  bool any = false;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::string t = trim(line);
    if (t.empty()) continue;
    std::istringstream ls(t);
    int state = 0;
    double p = 0.0;
    if (!(ls >> state >> p)) parse_fail(lineno, "expected `state probability`");
    std::string tail;
    if (ls >> tail) parse_fail(lineno, "trailing content `" + tail + "`");
    if (state < 1 || state > n_states)
      parse_fail(lineno, "state " + std::to_string(state) + " outside 1.." +
                             std::to_string(n_states));
    mass[static_cast<size_t>(state) - 1] = p;
    any = true;
  }
  if (!any) throw QsdError(ErrKind::ParseError, "empty distribution file");
  return ProbDist::normalized(std::move(mass));
}

std::string format_sig12(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

}  // namespace qsd
