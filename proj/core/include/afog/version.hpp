#pragma once

namespace afog {
inline constexpr const char* kVersion = "0.1.0";
}
