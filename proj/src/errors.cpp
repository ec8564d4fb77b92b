#include "icac/errors.hpp"

namespace icac {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kNotPsd: return "NotPsd";
    case ErrorCode::kNotPd: return "NotPd";
    case ErrorCode::kConfig: return "ConfigError";
    case ErrorCode::kAssumptionViolation: return "AssumptionViolation";
    case ErrorCode::kNoConvergence: return "NoConvergence";
    case ErrorCode::kNotStabilizing: return "NotStabilizing";
    case ErrorCode::kNotStabilizable: return "NotStabilizable";
    case ErrorCode::kSingularInnovation: return "SingularInnovation";
    case ErrorCode::kBudgetBelowFloor: return "BudgetBelowFloor";
    case ErrorCode::kInfeasible: return "Infeasible";
    case ErrorCode::kMaxIterations: return "MaxIterations";
    case ErrorCode::kNumericalFailure: return "NumericalFailure";
    case ErrorCode::kTooFewSamples: return "TooFewSamples";
    case ErrorCode::kNumericalBlowup: return "NumericalBlowup";
  }
  return "Unknown";
}

}  // namespace icac
