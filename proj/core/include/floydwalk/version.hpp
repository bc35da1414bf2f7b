#pragma once

namespace floydwalk {

inline constexpr const char* kVersion = "0.1.0";

}  // namespace floydwalk
