#pragma once

namespace sno {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace sno
