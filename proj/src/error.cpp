#include "pjf/error.hpp"

namespace pjf {

std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::NonPSDCovariance: return "NonPSDCovariance";
    case ErrorCode::NonIncreasingTimes: return "NonIncreasingTimes";
    case ErrorCode::InvalidSchedule: return "InvalidSchedule";
    case ErrorCode::HorizonTooShort: return "HorizonTooShort";
    case ErrorCode::UnknownFunctionDescriptor: return "UnknownFunctionDescriptor";
    case ErrorCode::NonFiniteFunction: return "NonFiniteFunction";
    case ErrorCode::ZeroConditionalMass: return "ZeroConditionalMass";
    case ErrorCode::NumericalBlowup: return "NumericalBlowup";
    case ErrorCode::NegativeDt: return "NegativeDt";
    case ErrorCode::SingularS: return "SingularS";
    case ErrorCode::WeightCollapse: return "WeightCollapse";
    case ErrorCode::ZeroReferenceDensity: return "ZeroReferenceDensity";
    case ErrorCode::ZeroMass: return "ZeroMass";
    case ErrorCode::NonpositiveR: return "NonpositiveR";
    case ErrorCode::BoundaryLeak: return "BoundaryLeak";
    case ErrorCode::ZeroLikelihoodMass: return "ZeroLikelihoodMass";
    case ErrorCode::UnsupportedScenario: return "UnsupportedScenario";
    case ErrorCode::IncompatibleMethod: return "IncompatibleMethod";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

}  // namespace pjf
