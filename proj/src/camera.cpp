#include "mvps/camera.hpp"

#include <Eigen/Geometry>
#include <cmath>

#include "mvps/light.hpp"

namespace mvps {

Camera::Camera(const Mat3& rotation, const Vec3& translation,
               double focal_length, const Vec2& principal_point, int width,
               int height)
    : rotation_(rotation),
      translation_(translation),
      focal_length_(focal_length),
      principal_point_(principal_point),
      width_(width),
      height_(height) {
  if (!rotation_.allFinite() || !translation_.allFinite() ||
      !principal_point_.allFinite() || !std::isfinite(focal_length_)) {
    throw InputError("camera: non-finite parameters");
  }
  if ((rotation_ * rotation_.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() > 1e-9 ||
      std::abs(rotation_.determinant() - 1.0) > 1e-9) {
    throw InputError("camera: rotation is not a proper orthonormal matrix");
  }
  if (width_ <= 0 || height_ <= 0) {
    throw InputError("camera: resolution must be positive");
  }
  if (focal_length_ <= 0.0) {
    throw InputError("camera: focal length must be positive");
  }
  center_ = -rotation_.transpose() * translation_;
}

Camera Camera::look_at(const Vec3& eye, const Vec3& target, const Vec3& up,
                       double focal_length, int width, int height) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 right = forward.cross(up);
  if (right.norm() < 1e-9) {
    right = forward.cross(std::abs(forward.x()) < 0.9 ? Vec3::UnitX() : Vec3::UnitY());
  }
  right.normalize();
  // Image rows grow downwards, so camera y points opposite to `up`.
  const Vec3 down = forward.cross(right);
  Mat3 rotation;
  rotation.row(0) = right.transpose();
  rotation.row(1) = down.transpose();
  rotation.row(2) = forward.transpose();
  const Vec3 translation = -rotation * eye;
  const Vec2 principal(0.5 * (width - 1), 0.5 * (height - 1));
  return Camera(rotation, translation, focal_length, principal, width, height);
}

Projection Camera::project(const Vec3& x) const {
  Projection out;
  const Vec3 xc = rotation_ * x + translation_;
  out.depth = xc.z();
  if (out.depth <= 0.0) {
    return out;
  }
  out.pixel = Vec2(focal_length_ * xc.x() / xc.z() + principal_point_.x(),
                   focal_length_ * xc.y() / xc.z() + principal_point_.y());
  out.in_frustum = out.pixel.x() >= 0.0 && out.pixel.x() < width_ &&
                   out.pixel.y() >= 0.0 && out.pixel.y() < height_;
  return out;
}

Vec3 Camera::backproject(const Vec2& pixel, double depth) const {
  const Vec3 xc((pixel.x() - principal_point_.x()) * depth / focal_length_,
                (pixel.y() - principal_point_.y()) * depth / focal_length_,
                depth);
  return rotation_.transpose() * (xc - translation_);
}

Vec3 Camera::ray_direction(const Vec2& pixel) const {
  const Vec3 dc((pixel.x() - principal_point_.x()) / focal_length_,
                (pixel.y() - principal_point_.y()) / focal_length_, 1.0);
  return (rotation_.transpose() * dc).normalized();
}

void PointLight::validate() const {
  if (!position.allFinite() || !direction.allFinite()) {
    throw InputError("light: non-finite position or direction");
  }
  if (std::abs(direction.norm() - 1.0) > 1e-9) {
    throw InputError("light: principal direction must be unit length");
  }
  if (!(brightness > 0.0)) {
    throw InputError("light: brightness must be positive");
  }
  if (!(mu >= 0.0)) {
    throw InputError("light: angular dissipation must be non-negative");
  }
}

}  // namespace mvps
