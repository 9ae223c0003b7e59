#pragma once

// Heatmap overlays on PNG images. Requires libpng (headlens::png target).

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include "headlens/aggregation.hpp"
#include "headlens/error.hpp"
#include "headlens/image.hpp"
#include "headlens/resample.hpp"

namespace headlens {

inline constexpr double kOverlayAlpha = 0.5;

inline RgbImage read_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.string().c_str())) {
    throw FormatError("cannot decode PNG " + path.string() + ": " + image.message);
  }
  image.format = PNG_FORMAT_RGB;
  RgbImage out{image.width, image.height, std::vector<std::uint8_t>(PNG_IMAGE_SIZE(image))};
  if (!png_image_finish_read(&image, nullptr, out.pixels.data(), 0, nullptr)) {
    const std::string msg = image.message;
    png_image_free(&image);
    throw FormatError("cannot decode PNG " + path.string() + ": " + msg);
  }
  return out;
}

inline void write_png(const RgbImage& img, const std::filesystem::path& path) {
  if (img.pixels.size() != img.width * img.height * 3) throw ShapeError("RGB buffer size mismatch");
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width);
  image.height = static_cast<png_uint_32>(img.height);
  image.format = PNG_FORMAT_RGB;
  if (!png_image_write_to_file(&image, path.string().c_str(), 0, img.pixels.data(), 0, nullptr)) {
    throw IoError("cannot write PNG " + path.string() + ": " + image.message);
  }
}

/// Blue (low) to red (high); opacity grows linearly with the value.
struct RampColor {
  double r, g, b, alpha;
};

inline RampColor ramp(double v) {
  v = std::clamp(v, 0.0, 1.0);
  return {255.0 * v, 0.0, 255.0 * (1.0 - v), kOverlayAlpha * v};
}

/// Blends the heatmap (resampled to the image size) over the image.
inline RgbImage blend_overlay(const RgbImage& base, const TokenHeatmap& heatmap) {
  if (base.width < heatmap.resolution() || base.height < heatmap.resolution()) {
    throw ShapeError("image " + std::to_string(base.width) + "x" + std::to_string(base.height) +
                     " is smaller than the heatmap (" + std::to_string(heatmap.resolution()) + ")");
  }
  const Matrix heat = bicubic_resize(heatmap.values(), base.height, base.width);
  RgbImage out = base;
  for (std::size_t y = 0; y < base.height; ++y) {
    for (std::size_t x = 0; x < base.width; ++x) {
      const RampColor c = ramp(heat(y, x));
      std::uint8_t* px = out.pixels.data() + 3 * (y * base.width + x);
      const double tint[3] = {c.r, c.g, c.b};
      for (int ch = 0; ch < 3; ++ch) {
        const double v = (1.0 - c.alpha) * px[ch] + c.alpha * tint[ch];
        px[ch] = static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
      }
    }
  }
  return out;
}

inline void render_overlay(const std::filesystem::path& base_image_path, const TokenHeatmap& heatmap,
                           const std::filesystem::path& out_path) {
  write_png(blend_overlay(read_png(base_image_path), heatmap), out_path);
}

}  // namespace headlens
