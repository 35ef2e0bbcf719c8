#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace asymlyap {

enum class ErrorCode {
  NonSquare,
  NonFinite,
  DimensionMismatch,
  IterationLimit,
  NotSymmetric,
  NotSymmetricRhs,
  Singular,
  NotHurwitz,
  NotPositiveDefinite,
  NotNegativeDefinite,
  RNotPositiveDefinite,
  NoStabilizingSeed,
  InfeasibleLmi,
  AsymmetricClosedLoop,
  PHatFailed,
  NonPositiveAlpha,
  NonConvergent,
  TooFewAgents,
  StructureViolated,
  InvalidArgument,
  ParseError,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::NonSquare: return "NonSquare";
    case ErrorCode::NonFinite: return "NonFinite";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::IterationLimit: return "IterationLimit";
    case ErrorCode::NotSymmetric: return "NotSymmetric";
    case ErrorCode::NotSymmetricRhs: return "NotSymmetricRhs";
    case ErrorCode::Singular: return "Singular";
    case ErrorCode::NotHurwitz: return "NotHurwitz";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::NotNegativeDefinite: return "NotNegativeDefinite";
    case ErrorCode::RNotPositiveDefinite: return "RNotPositiveDefinite";
    case ErrorCode::NoStabilizingSeed: return "NoStabilizingSeed";
    case ErrorCode::InfeasibleLmi: return "InfeasibleLmi";
    case ErrorCode::AsymmetricClosedLoop: return "AsymmetricClosedLoop";
    case ErrorCode::PHatFailed: return "PHatFailed";
    case ErrorCode::NonPositiveAlpha: return "NonPositiveAlpha";
    case ErrorCode::NonConvergent: return "NonConvergent";
    case ErrorCode::TooFewAgents: return "TooFewAgents";
    case ErrorCode::StructureViolated: return "StructureViolated";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::ParseError: return "ParseError";
  }
  return "Unknown";
}

/// Every failure in the library surfaces as this exception; callers branch
/// on code() rather than on the message text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace asymlyap
