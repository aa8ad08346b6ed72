#include "mvps/view.hpp"

#include <cmath>

namespace mvps {

void PsView::validate() const {
  if (lights.size() < 2) {
    throw InputError("view: at least two lights are required for image ratios");
  }
  if (images.size() != lights.size() || valid_masks.size() != lights.size()) {
    throw InputError("view: light, image and mask counts differ");
  }
  for (const PointLight& l : lights) l.validate();
  for (std::size_t k = 0; k < images.size(); ++k) {
    if (images[k].width != camera.width() || images[k].height != camera.height() ||
        valid_masks[k].width != camera.width() || valid_masks[k].height != camera.height()) {
      throw InputError("view: image resolution does not match camera");
    }
  }
}

std::optional<double> sample_image(const PsView& view, int light_index, const Vec2& u) {
  const Image& image = view.images[light_index];
  const Mask& mask = view.valid_masks[light_index];
  if (!(u.x() >= 0.0 && u.y() >= 0.0)) return std::nullopt;
  const int x0 = static_cast<int>(std::floor(u.x()));
  const int y0 = static_cast<int>(std::floor(u.y()));
  const double fx = u.x() - x0;
  const double fy = u.y() - y0;
  // Exact pixel hits need only one support column / row.
  const int x1 = fx > 0.0 ? x0 + 1 : x0;
  const int y1 = fy > 0.0 ? y0 + 1 : y0;
  if (x1 >= image.width || y1 >= image.height) return std::nullopt;
  if (!mask.at(x0, y0) || !mask.at(x1, y0) || !mask.at(x0, y1) || !mask.at(x1, y1)) {
    return std::nullopt;
  }
  const double top = (1.0 - fx) * image.at(x0, y0) + fx * image.at(x1, y0);
  const double bottom = (1.0 - fx) * image.at(x0, y1) + fx * image.at(x1, y1);
  return (1.0 - fy) * top + fy * bottom;
}

}  // namespace mvps
