#pragma once

namespace ablatron {

inline constexpr const char* version = "0.1.0";

}  // namespace ablatron
