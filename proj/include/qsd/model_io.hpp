#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <variant>

#include "qsd/bd_model.hpp"
#include "qsd/generator.hpp"
#include "qsd/return_map.hpp"

namespace qsd {

/// A parsed model input: either a birth-death model definition
/// (kind=logistic|sis|custom with parameter lines) or a raw generator file
/// (n=<N> header plus rate triples).  Certificates need the birth-death form.
struct ModelInput {
  std::optional<BirthDeathModel> bd;
  std::optional<Generator> gen;

  const Generator& generator() const;  // builds from bd when needed
};

/// Parses a model definition file.  Recognized keys:
///   kind=logistic|sis|custom
///   b=, d=, e=, A=, N=, lambda=, mu=, truncation=exact|certified
///   bvec=, dvec=  (comma-separated decimals, custom kind)
/// Lines starting with '#' are comments.  Errors carry the line number.
BirthDeathModel read_bd_model(std::istream& in);

/// Loads either format, sniffing `kind=` vs `n=` on the first content line.
ModelInput read_model_file(const std::string& path);

/// mu specification: "uniform", "delta<K>" (e.g. delta1), or a path to a
/// two-column `state probability` file.
ProbDist parse_mu_spec(const std::string& spec, int n_states);

/// Two-column QSD/distribution export with `# key: value` header comments.
void write_distribution(std::ostream& out, const ProbDist& dist,
                        const std::vector<std::pair<std::string, std::string>>& header);
ProbDist read_distribution(std::istream& in, int n_states);

/// Fixed 12-significant-digit decimal formatting ('.' separator, no locale).
std::string format_sig12(double v);

}  // namespace qsd
