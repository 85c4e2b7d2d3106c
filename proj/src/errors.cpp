#include "ubsr/errors.hpp"

namespace ubsr {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::Overflow: return "Overflow";
    case ErrorCode::MaxIterations: return "MaxIterations";
    case ErrorCode::SingularJacobian: return "SingularJacobian";
    case ErrorCode::Stall: return "Stall";
    case ErrorCode::NonpositiveRho: return "NonpositiveRho";
    case ErrorCode::DegenerateDerivative: return "DegenerateDerivative";
    case ErrorCode::InfeasibleStart: return "InfeasibleStart";
    case ErrorCode::NoSignChange: return "NoSignChange";
    case ErrorCode::NotPositiveSemidefinite: return "NotPositiveSemidefinite";
    case ErrorCode::AllMissingColumn: return "AllMissingColumn";
    case ErrorCode::Parse: return "Parse";
    case ErrorCode::Io: return "Io";
    case ErrorCode::TooManyFailures: return "TooManyFailures";
  }
  return "Unknown";
}

bool is_convergence_failure(ErrorCode code) {
  switch (code) {
    case ErrorCode::MaxIterations:
    case ErrorCode::SingularJacobian:
    case ErrorCode::Stall:
    case ErrorCode::NonpositiveRho:
    case ErrorCode::DegenerateDerivative:
    case ErrorCode::NoSignChange:
    case ErrorCode::TooManyFailures:
      return true;
    default:
      return false;
  }
}

}  // namespace ubsr
