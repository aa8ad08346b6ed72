#pragma once

#include <optional>
#include <vector>

#include "mvps/camera.hpp"
#include "mvps/image.hpp"
#include "mvps/light.hpp"

namespace mvps {

/// One calibrated viewpoint with its photometric stereo image set: one image
/// and validity mask per light.
struct PsView {
  Camera camera;
  std::vector<PointLight> lights;
  std::vector<Image> images;
  std::vector<Mask> valid_masks;

  /// Throws InputError unless lights/images/masks agree in count (>= 2) and
  /// every image matches the camera resolution.
  void validate() const;
  int light_count() const { return static_cast<int>(lights.size()); }
};

/// Bilinear sample of image `light_index` at continuous pixel coordinate `u`.
/// Empty when any of the four support pixels is masked or out of bounds.
std::optional<double> sample_image(const PsView& view, int light_index, const Vec2& u);

}  // namespace mvps
