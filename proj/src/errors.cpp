#include "qsd/errors.hpp"

namespace qsd {

const char* err_kind_name(ErrKind k) {
  switch (k) {
    case ErrKind::NegativeRate: return "NegativeRate";
    case ErrKind::SelfRate: return "SelfRate";
    case ErrKind::ZeroExitRate: return "ZeroExitRate";
    case ErrKind::NoAbsorption: return "NoAbsorption";
    case ErrKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrKind::DimensionMismatch: return "DimensionMismatch";
    case ErrKind::InvalidDistribution: return "InvalidDistribution";
    case ErrKind::SingularSystem: return "SingularSystem";
    case ErrKind::Divergent: return "Divergent";
    case ErrKind::NotConverged: return "NotConverged";
    case ErrKind::StepTooLarge: return "StepTooLarge";
    case ErrKind::InvalidParams: return "InvalidParams";
    case ErrKind::DivergentAlphaSum: return "DivergentAlphaSum";
    case ErrKind::DSeriesDivergent: return "DSeriesDivergent";
    case ErrKind::AssumptionViolated: return "AssumptionViolated";
    case ErrKind::HorizonExceeded: return "HorizonExceeded";
    case ErrKind::ParseError: return "ParseError";
  }
  return "Unknown";
}

}  // namespace qsd
