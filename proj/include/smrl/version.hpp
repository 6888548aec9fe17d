#pragma once

namespace smrl {

inline constexpr const char* kToolName = "smrl";
inline constexpr const char* kToolVersion = "0.1.0";

}  // namespace smrl
