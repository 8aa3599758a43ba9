#include "spacing/error.hpp"

namespace spacing {

std::string_view error_name(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::DegeneratePrototypes: return "DegeneratePrototypes";
    case ErrorCode::InvalidAlpha: return "InvalidAlpha";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::UnsupportedWeights: return "UnsupportedWeights";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::StaleCache: return "StaleCache";
    case ErrorCode::InvalidLabel: return "InvalidLabel";
    case ErrorCode::ZeroLatent: return "ZeroLatent";
    case ErrorCode::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::SeparationInfeasible: return "SeparationInfeasible";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::MissingSidecar: return "MissingSidecar";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& detail)
    : std::runtime_error(std::string(error_name(code)) + ": " + detail),
      code_(code),
      detail_(detail) {}

}  // namespace spacing
