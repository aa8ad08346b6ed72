#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "mvps/types.hpp"

namespace mvps {

/// Row-major single-channel intensity grid, values nominally in [0,1].
struct Image {
  int width = 0;
  int height = 0;
  std::vector<float> pixels;

  Image() = default;
  Image(int w, int h, float fill = 0.0f)
      : width(w), height(h), pixels(static_cast<std::size_t>(w) * h, fill) {}

  float& at(int x, int y) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  float at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
};

/// Per-pixel validity; nonzero means valid.
struct Mask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> valid;

  Mask() = default;
  Mask(int w, int h, bool fill = true)
      : width(w), height(h), valid(static_cast<std::size_t>(w) * h, fill ? 1 : 0) {}

  bool at(int x, int y) const { return valid[static_cast<std::size_t>(y) * width + x] != 0; }
  void set(int x, int y, bool v) { valid[static_cast<std::size_t>(y) * width + x] = v ? 1 : 0; }
  std::size_t count_valid() const;
};

/// Loads an 8- or 16-bit grayscale PNG normalised to [0,1] by the maximum
/// representable value. Colour PNGs are converted to luminance.
Image read_png(const std::filesystem::path& path);
void write_png16(const std::filesystem::path& path, const Image& image);
void write_png8(const std::filesystem::path& path, const Image& image);

/// Elementwise AND.
Mask operator&(const Mask& a, const Mask& b);

}  // namespace mvps
