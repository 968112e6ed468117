#pragma once

namespace epd {

inline constexpr const char* kVersion = "1.0.0";

}  // namespace epd
