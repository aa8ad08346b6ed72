#pragma once

#include "mvps/types.hpp"

namespace mvps {

struct Projection {
  Vec2 pixel = Vec2::Zero();
  double depth = 0.0;
  bool in_frustum = false;
};

/// Pinhole camera. `rotation` and `translation` map world to camera
/// coordinates: x_cam = R x + t. Camera z looks forward, image rows grow
/// with camera y. Pixel (c, r) has its centre at u = (c, r).
class Camera {
 public:
  Camera(const Mat3& rotation, const Vec3& translation, double focal_length,
         const Vec2& principal_point, int width, int height);

  /// Camera at `eye` looking at `target`; `up` fixes the roll.
  static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up,
                        double focal_length, int width, int height);

  Projection project(const Vec3& x) const;
  Vec3 backproject(const Vec2& pixel, double depth) const;
  /// Unit world-space direction of the viewing ray through `pixel`.
  Vec3 ray_direction(const Vec2& pixel) const;
  Vec3 center() const { return center_; }
  /// Unit vector from `x` towards the camera centre.
  Vec3 view_vector(const Vec3& x) const { return (center_ - x).normalized(); }

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }
  double focal_length() const { return focal_length_; }
  const Vec2& principal_point() const { return principal_point_; }
  int width() const { return width_; }
  int height() const { return height_; }

 private:
  Mat3 rotation_;
  Vec3 translation_;
  double focal_length_;
  Vec2 principal_point_;
  int width_;
  int height_;
  Vec3 center_;
};

inline Projection project(const Camera& camera, const Vec3& x) {
  return camera.project(x);
}

}  // namespace mvps
