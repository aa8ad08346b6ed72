#include "mvps/raycast.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mvps {

namespace {

// Orders endpoints so that raycast(a, b) and raycast(b, a) march identically.
bool lexicographic_less(const Vec3& a, const Vec3& b) {
  for (int i = 0; i < 3; ++i) {
    if (a[i] != b[i]) return a[i] < b[i];
  }
  return false;
}

// Parametric exit of the ray from an axis-aligned box containing it.
double box_exit(const Vec3& origin, const Vec3& dir, const Vec3& center, double half) {
  double t = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (dir[a] > 0.0) t = std::min(t, (center[a] + half - origin[a]) / dir[a]);
    else if (dir[a] < 0.0) t = std::min(t, (center[a] - half - origin[a]) / dir[a]);
  }
  return t;
}

// Segment parameter range inside the bounds cube.
bool clip_to_cube(const Vec3& origin, const Vec3& dir, const Cube& cube, double& t0, double& t1) {
  const Vec3 lo = cube.min();
  const Vec3 hi = cube.max();
  for (int a = 0; a < 3; ++a) {
    if (dir[a] == 0.0) {
      if (origin[a] < lo[a] || origin[a] > hi[a]) return false;
      continue;
    }
    double n = (lo[a] - origin[a]) / dir[a];
    double f = (hi[a] - origin[a]) / dir[a];
    if (n > f) std::swap(n, f);
    t0 = std::max(t0, n);
    t1 = std::min(t1, f);
  }
  return t0 <= t1;
}

}  // namespace

RayResult raycast(const SdfVolume& volume, const Vec3& origin, const Vec3& target) {
  const bool swap = lexicographic_less(target, origin);
  const Vec3& a = swap ? target : origin;
  const Vec3& b = swap ? origin : target;
  const Vec3 delta = b - a;
  const double length = delta.norm();
  if (length == 0.0) return RayResult::Clear;
  const Vec3 dir = delta / length;

  const double finest = volume.finest_edge();
  const double eps = 1.5 * finest;
  const double step = 0.5 * finest;
  const double nudge = 1e-6 * finest;
  const double t_begin = eps;
  const double t_end = length - eps;
  if (t_end <= t_begin) return RayResult::Clear;

  double inside_lo = t_begin;
  double inside_hi = t_end;
  if (!clip_to_cube(a, dir, volume.bounds(), inside_lo, inside_hi)) {
    return RayResult::Clear;  // whole segment lies in empty space outside the volume
  }

  // Each sample carries a lower bound on |d| at its position (negative when
  // unknown). A sign flip only counts when a zero of a 1-Lipschitz field fits
  // between the two samples; open surfaces flip sign past their rim without
  // any surface there.
  int previous = 0;
  double previous_bound = -1.0;
  double previous_t = 0.0;
  auto visit = [&](int sign, double bound, double at) {
    bool changed = previous != 0 && sign != previous;
    if (changed && bound >= 0.0 && previous_bound >= 0.0) {
      changed = bound + previous_bound <= (at - previous_t) + finest;
    }
    previous = sign;
    previous_bound = bound;
    previous_t = at;
    return changed;
  };
  // Space outside the bounds counts as outside the surface.
  if (inside_lo > t_begin && visit(1, -1.0, inside_lo)) return RayResult::Blocked;

  double t = inside_lo;
  while (true) {
    const Vec3 p = a + t * dir;
    const int leaf = volume.locate(p);
    double next;
    int sign = 1;
    double bound = -1.0;
    if (leaf >= 0) {
      const OctreeNode& n = volume.node(leaf);
      double value = n.sdf;
      if (n.band) {
        value += volume.voxel_gradient(n.voxel_id).dot(p - n.center);
        bound = std::abs(value);
        next = t + step;
      } else {
        bound = std::max(std::abs(value) - std::sqrt(3.0) * n.half_size, 0.0);
        next = std::max(box_exit(a, dir, n.center, n.half_size) + nudge, t + nudge);
      }
      sign = value < 0.0 ? -1 : 1;
    } else {
      next = inside_hi;
    }
    if (visit(sign, bound, t)) return RayResult::Blocked;
    if (t >= inside_hi) break;
    t = std::min(next, inside_hi);
  }
  if (inside_hi < t_end && visit(1, -1.0, inside_hi)) return RayResult::Blocked;
  return RayResult::Clear;
}

RayResult raycast(const TriangleBvh& mesh, const Vec3& origin, const Vec3& target,
                  double epsilon) {
  const bool swap = lexicographic_less(target, origin);
  const Vec3& a = swap ? target : origin;
  const Vec3& b = swap ? origin : target;
  const Vec3 delta = b - a;
  const double length = delta.norm();
  if (length <= 2.0 * epsilon) return RayResult::Clear;
  const Vec3 dir = delta / length;
  return mesh.any_hit(a, dir, epsilon, length - epsilon) ? RayResult::Blocked : RayResult::Clear;
}

}  // namespace mvps
