#pragma once

#include <stdexcept>
#include <string>

namespace qsd {

enum class ErrKind {
  NegativeRate,
  SelfRate,
  ZeroExitRate,
  NoAbsorption,
  IndexOutOfRange,
  DimensionMismatch,
  InvalidDistribution,
  SingularSystem,
  Divergent,
  NotConverged,
  StepTooLarge,
  InvalidParams,
  DivergentAlphaSum,
  DSeriesDivergent,
  AssumptionViolated,
  HorizonExceeded,
  ParseError,
};

const char* err_kind_name(ErrKind k);

/// All library errors carry a machine-checkable kind plus a human message.
class QsdError : public std::runtime_error {
 public:
  QsdError(ErrKind kind, const std::string& msg)
      : std::runtime_error(std::string(err_kind_name(kind)) + ": " + msg),
        kind_(kind) {}

  ErrKind kind() const { return kind_; }

 private:
  ErrKind kind_;
};

}  // namespace qsd
