#include "cell/error_codes.hpp"

namespace cell {

std::string_view title(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmergencyStop: return "Emergency Stop";
    case ErrorCode::SpeedViolation: return "Speed Violation";
    case ErrorCode::ProximityToSingularity: return "Proximity to Singularity";
    case ErrorCode::JointOutOfRange: return "Joint Out of Range";
    case ErrorCode::JointLoadTooHigh: return "Joint Load Too High";
    case ErrorCode::Unknown: break;
  }
  return "Unknown";
}

std::string_view description(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmergencyStop:
      return "The emergency stop circuit was opened. Motors are off; restart the controller to resume.";
    case ErrorCode::SpeedViolation:
      return "The streamed target moved faster than the supervised limit for a sustained period.";
    case ErrorCode::ProximityToSingularity:
      return "The commanded motion reached or crossed a kinematic singularity.";
    case ErrorCode::JointOutOfRange:
      return "The commanded pose requires a joint position outside its configured range.";
    case ErrorCode::JointLoadTooHigh:
      return "A joint reported a load above its permitted maximum.";
    case ErrorCode::Unknown: break;
  }
  return "The controller stopped for a reason outside the known categories.";
}

int domain_of(ErrorCode code) {
  const int v = static_cast<int>(code);
  return v >= 90000 && v < 100000 ? 9 : 5;
}

std::optional<ErrorCode> known_code(int code) {
  switch (code) {
    case 90518: return ErrorCode::EmergencyStop;
    case 90515: return ErrorCode::SpeedViolation;
    case 50456: return ErrorCode::ProximityToSingularity;
    case 50027: return ErrorCode::JointOutOfRange;
    case 50055: return ErrorCode::JointLoadTooHigh;
    default: return std::nullopt;
  }
}

}  // namespace cell
