#pragma once

namespace corral {

inline constexpr const char* kEngineVersion = "0.1.0";

}  // namespace corral
