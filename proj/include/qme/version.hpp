#pragma once

namespace qme {

inline constexpr const char* kProjectName = "qme";
inline constexpr const char* kProjectVersion = "0.1.0";

}  // namespace qme
