#pragma once

#include <cstddef>
#include <cstdint>
#include <vector>

namespace headlens {

struct RgbImage {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> pixels;  // RGB, row-major

  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

}  // namespace headlens
