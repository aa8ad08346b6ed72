#include "mvps/distance.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <random>

namespace mvps {

SignedDistance::SignedDistance(TriangleMesh mesh) {
  remove_degenerate_triangles(mesh);
  if (mesh.empty()) throw InputError("signed distance: empty mesh");
  check_orientation(mesh);

  const int faces = static_cast<int>(mesh.triangles.size());
  face_normals_.resize(faces);
  for (int f = 0; f < faces; ++f) face_normals_[f] = face_normal(mesh, f);
  vertex_normals_ = vertex_normals(mesh);

  std::map<std::pair<int, int>, Vec3> edge_sum;
  for (int f = 0; f < faces; ++f) {
    const Triangle& t = mesh.triangles[f];
    for (int k = 0; k < 3; ++k) {
      const auto it = edge_sum.try_emplace(std::minmax(t[k], t[(k + 1) % 3]), Vec3::Zero()).first;
      it->second += face_normals_[f];
    }
  }
  edge_normals_.resize(faces);
  for (int f = 0; f < faces; ++f) {
    const Triangle& t = mesh.triangles[f];
    for (int k = 0; k < 3; ++k) {
      edge_normals_[f][k] = edge_sum.at(std::minmax(t[k], t[(k + 1) % 3]));
    }
  }
  bvh_ = TriangleBvh(std::move(mesh));
}

double SignedDistance::operator()(const Vec3& p) const {
  const ClosestPoint c = bvh_.closest_point(p);
  if (c.squared_distance == 0.0) return 0.0;
  Vec3 normal;
  switch (c.feature) {
    case Feature::Face: normal = face_normals_[c.face]; break;
    case Feature::Edge: normal = edge_normals_[c.face][c.local_index]; break;
    case Feature::Vertex:
      normal = vertex_normals_[bvh_.mesh().triangles[c.face][c.local_index]];
      break;
  }
  const double distance = std::sqrt(c.squared_distance);
  return (p - c.point).dot(normal) < 0.0 ? -distance : distance;
}

std::vector<double> signed_distance_transform(const TriangleMesh& mesh,
                                              std::span<const Vec3> query_points) {
  const SignedDistance sdf(mesh);
  std::vector<double> out;
  out.reserve(query_points.size());
  for (const Vec3& p : query_points) out.push_back(sdf(p));
  return out;
}

std::vector<Vec3> sample_surface(const TriangleMesh& mesh, int count, std::uint64_t seed) {
  if (mesh.empty()) throw InputError("surface sampling: empty mesh");
  const int faces = static_cast<int>(mesh.triangles.size());
  std::vector<double> cdf(faces);
  double total = 0.0;
  for (int f = 0; f < faces; ++f) {
    total += face_area(mesh, f);
    cdf[f] = total;
  }
  if (!(total > 0.0)) throw InputError("surface sampling: zero-area mesh");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  std::vector<Vec3> samples;
  samples.reserve(count);
  for (int i = 0; i < count; ++i) {
    const double r = uniform(rng) * total;
    const int f = static_cast<int>(std::min<std::ptrdiff_t>(
        std::upper_bound(cdf.begin(), cdf.end(), r) - cdf.begin(), faces - 1));
    const double s = std::sqrt(uniform(rng));
    const double t = uniform(rng);
    const Triangle& tri = mesh.triangles[f];
    samples.push_back((1.0 - s) * mesh.vertices[tri[0]] + s * (1.0 - t) * mesh.vertices[tri[1]] +
                      s * t * mesh.vertices[tri[2]]);
  }
  return samples;
}

DistanceStats surface_distance(const TriangleMesh& from, const TriangleMesh& to, int count,
                               std::uint64_t seed) {
  if (from.empty() || to.empty()) throw InputError("surface distance: empty mesh");
  if (count <= 0) throw InputError("surface distance: sample count must be positive");
  const TriangleBvh bvh(to);
  const std::vector<Vec3> samples = sample_surface(from, count, seed);
  DistanceStats stats;
  stats.samples = count;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (const Vec3& p : samples) {
    const double d = std::sqrt(bvh.closest_point(p).squared_distance);
    sum += d;
    sum_sq += d * d;
    stats.max = std::max(stats.max, d);
  }
  stats.mean = sum / count;
  stats.rms = std::sqrt(sum_sq / count);
  return stats;
}

double rms_hausdorff(const TriangleMesh& reconstructed, const TriangleMesh& ground_truth,
                     int sample_count, std::uint64_t seed) {
  return surface_distance(reconstructed, ground_truth, sample_count, seed).rms;
}

}  // namespace mvps
