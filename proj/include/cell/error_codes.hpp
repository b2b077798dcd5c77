#pragma once

#include <optional>
#include <string_view>

namespace cell {

/// Controller fault codes reported through the event log.
enum class ErrorCode : int {
  Unknown = 0,
  JointOutOfRange = 50027,
  JointLoadTooHigh = 50055,
  ProximityToSingularity = 50456,
  SpeedViolation = 90515,
  EmergencyStop = 90518,
};

std::string_view title(ErrorCode code);
std::string_view description(ErrorCode code);

/// Log domain: 9xxxx codes land in elog/9, everything else in elog/5.
int domain_of(ErrorCode code);

/// Maps an integer to one of the five named codes; nullopt otherwise.
std::optional<ErrorCode> known_code(int code);

}  // namespace cell
