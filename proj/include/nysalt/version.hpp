#pragma once

namespace nysalt {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace nysalt
