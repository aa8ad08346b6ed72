#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mvps/bvh.hpp"

namespace mvps {

/// Signed distance to a triangle mesh: negative inside, positive outside.
/// The sign comes from the angle-weighted pseudonormal of the nearest
/// feature, which stays robust near small holes where ray parity fails.
class SignedDistance {
 public:
  /// Throws InputError for inconsistently oriented or empty meshes.
  explicit SignedDistance(TriangleMesh mesh);

  double operator()(const Vec3& p) const;
  const TriangleBvh& bvh() const { return bvh_; }

 private:
  TriangleBvh bvh_;
  std::vector<Vec3> face_normals_;
  std::vector<Vec3> vertex_normals_;
  // Per face, per local edge k = (k, k+1): sum of adjacent face normals.
  std::vector<std::array<Vec3, 3>> edge_normals_;
};

std::vector<double> signed_distance_transform(const TriangleMesh& mesh,
                                              std::span<const Vec3> query_points);

/// Area-uniform random surface samples, deterministic under `seed`.
std::vector<Vec3> sample_surface(const TriangleMesh& mesh, int count, std::uint64_t seed);

struct DistanceStats {
  double rms = 0.0;
  double max = 0.0;
  double mean = 0.0;
  int samples = 0;
};

/// Distances from `count` samples on `from` to the surface of `to`.
DistanceStats surface_distance(const TriangleMesh& from, const TriangleMesh& to, int count,
                               std::uint64_t seed = 1);

/// RMS of sample-to-surface distances from `reconstructed` to `ground_truth`.
double rms_hausdorff(const TriangleMesh& reconstructed, const TriangleMesh& ground_truth,
                     int sample_count, std::uint64_t seed = 1);

}  // namespace mvps
