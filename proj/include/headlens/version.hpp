#pragma once

namespace headlens {

inline constexpr const char* kVersionString = "0.1.0";

}  // namespace headlens
