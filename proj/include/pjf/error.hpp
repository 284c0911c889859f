#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pjf {

/// Failure categories surfaced by every module. The C API maps these onto
/// `pjf_status` values one to one.
enum class ErrorCode {
  InvalidConfig,
  NonPSDCovariance,
  NonIncreasingTimes,
  InvalidSchedule,
  HorizonTooShort,
  UnknownFunctionDescriptor,
  NonFiniteFunction,
  ZeroConditionalMass,
  NumericalBlowup,
  NegativeDt,
  SingularS,
  WeightCollapse,
  ZeroReferenceDensity,
  ZeroMass,
  NonpositiveR,
  BoundaryLeak,
  ZeroLikelihoodMass,
  UnsupportedScenario,
  IncompatibleMethod,
  Io,
};

std::string_view to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace pjf
