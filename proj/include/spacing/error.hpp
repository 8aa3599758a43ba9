#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace spacing {

enum class ErrorCode {
  DimensionMismatch,
  DegeneratePrototypes,
  InvalidAlpha,
  InvalidArgument,
  UnsupportedWeights,
  TooFewSamples,
  StaleCache,
  InvalidLabel,
  ZeroLatent,
  NonFiniteLoss,
  SeparationInfeasible,
  ParseError,
  SchemaError,
  LengthMismatch,
  MissingSidecar,
  IoError,
};

std::string_view error_name(ErrorCode code) noexcept;

/// Every failure raised by the library. what() is prefixed with the code name
/// so that command-line surfaces can report it verbatim.
class Error : public std::runtime_error {
public:
  Error(ErrorCode code, const std::string& detail);

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace spacing
