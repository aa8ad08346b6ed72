#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace mvps {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Failure during computation (exit code 2 at the CLI).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unreadable or invalid input (exit code 1 at the CLI).
class InputError : public Error {
 public:
  using Error::Error;
};

inline bool is_finite(const Vec3& v) { return v.allFinite(); }

/// Axis-aligned cube.
struct Cube {
  Vec3 center = Vec3::Zero();
  double half_size = 1.0;

  Vec3 min() const { return center.array() - half_size; }
  Vec3 max() const { return center.array() + half_size; }
  double edge() const { return 2.0 * half_size; }
  double volume() const { return edge() * edge() * edge(); }
  bool contains(const Vec3& p, double margin = 0.0) const {
    return ((p - center).cwiseAbs().array() <= half_size - margin).all();
  }
};

enum class Axis : int { X = 0, Y = 1, Z = 2 };
enum class Direction : int { Negative = -1, Positive = 1 };

}  // namespace mvps
