#pragma once

#include <stdexcept>
#include <string>

namespace ubsr {

enum class ErrorCode {
  InvalidArgument,
  Overflow,
  MaxIterations,
  SingularJacobian,
  Stall,
  NonpositiveRho,
  DegenerateDerivative,
  InfeasibleStart,
  NoSignChange,
  NotPositiveSemidefinite,
  AllMissingColumn,
  Parse,
  Io,
  TooManyFailures,
};

const char* to_string(ErrorCode code);

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// True for failures of an iterative method (as opposed to bad input).
bool is_convergence_failure(ErrorCode code);

}  // namespace ubsr
