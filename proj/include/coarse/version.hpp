#pragma once

namespace coarse {
inline constexpr const char* kToolVersion = "0.1.0";
}
