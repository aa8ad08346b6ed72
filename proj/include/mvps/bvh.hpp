#pragma once

#include <optional>
#include <vector>

#include "mvps/mesh.hpp"

namespace mvps {

/// Nearest feature of a triangle to a query point.
enum class Feature : std::uint8_t { Face, Edge, Vertex };

struct ClosestPoint {
  Vec3 point = Vec3::Zero();
  double squared_distance = 0.0;
  int face = -1;
  Feature feature = Feature::Face;
  /// Local vertex index (0..2) for Vertex; edge (k, k+1 mod 3) for Edge.
  int local_index = 0;
};

struct RayHit {
  double t = 0.0;
  int face = -1;
  double b1 = 0.0;  // barycentric weight of vertex 1
  double b2 = 0.0;  // barycentric weight of vertex 2
};

/// Bounding volume hierarchy over a triangle mesh for ray and nearest-point
/// queries. Keeps its own copy of the geometry; read-only after construction.
class TriangleBvh {
 public:
  TriangleBvh() = default;
  explicit TriangleBvh(TriangleMesh mesh);

  const TriangleMesh& mesh() const { return mesh_; }
  bool empty() const { return mesh_.triangles.empty(); }

  /// First hit with t in (t_min, t_max); `direction` need not be unit.
  std::optional<RayHit> intersect(const Vec3& origin, const Vec3& direction, double t_min,
                                  double t_max) const;
  /// True when any triangle is hit with t in (t_min, t_max).
  bool any_hit(const Vec3& origin, const Vec3& direction, double t_min, double t_max) const;
  ClosestPoint closest_point(const Vec3& p) const;

 private:
  struct Node {
    Eigen::Vector3d lo;
    Eigen::Vector3d hi;
    int left = -1;  // interior: first child index; leaf: -1
    int right = -1;
    int begin = 0;  // leaf triangle range in order_
    int end = 0;
  };

  int build(int begin, int end, std::vector<Vec3>& centroids);
  template <bool AnyHit>
  std::optional<RayHit> traverse(const Vec3& origin, const Vec3& direction, double t_min,
                                 double t_max) const;

  TriangleMesh mesh_;
  std::vector<Node> nodes_;
  std::vector<int> order_;
};

/// Closest point on triangle (a, b, c) to p, with the feature classification.
ClosestPoint closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b,
                                       const Vec3& c);

}  // namespace mvps
