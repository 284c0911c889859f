#pragma once

namespace pjf {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace pjf
