#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace icac {

enum class ErrorCode {
  kDimensionMismatch,
  kNotPsd,
  kNotPd,
  kConfig,
  kAssumptionViolation,
  kNoConvergence,
  kNotStabilizing,
  kNotStabilizable,
  kSingularInnovation,
  kBudgetBelowFloor,
  kInfeasible,
  kMaxIterations,
  kNumericalFailure,
  kTooFewSamples,
  kNumericalBlowup,
};

std::string_view to_string(ErrorCode code);

// All library failures are reported through this exception; `code()` lets
// callers (the CLI in particular) map failures onto exit statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace icac
