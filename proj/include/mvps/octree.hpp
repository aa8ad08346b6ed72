#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "mvps/mesh.hpp"
#include "mvps/view.hpp"

namespace mvps {

struct OctreeNode {
  Vec3 center = Vec3::Zero();
  double half_size = 0.0;
  int level = 0;
  int parent = -1;
  int first_child = -1;  // children occupy [first_child, first_child + 8)

  // Leaf payload.
  double sdf = 0.0;
  bool band = false;
  int voxel_id = -1;  // assigned iff band

  bool is_leaf() const { return first_child < 0; }
  double edge() const { return 2.0 * half_size; }
};

/// Narrow-band leaf test: |sdf| < 2 voxel edges.
inline bool in_narrow_band(double sdf, double edge) { return std::abs(sdf) < 2.0 * edge; }

/// Narrow-band adaptive octree storing a signed distance field. Band leaves
/// (the solve domain) are numbered contiguously; `d()` holds their values
/// indexed by voxel id. Children of node i are stored contiguously in octant
/// order: bit 0 = +x, bit 1 = +y, bit 2 = +z.
class SdfVolume {
 public:
  explicit SdfVolume(const Cube& bounds);

  const Cube& bounds() const { return bounds_; }
  /// Deepest level among band leaves (or among all leaves when the band is empty).
  int level() const;
  double finest_edge() const;

  std::span<const OctreeNode> nodes() const { return nodes_; }
  const OctreeNode& node(int index) const { return nodes_[index]; }
  std::size_t leaf_count() const;

  int voxel_count() const { return static_cast<int>(voxel_nodes_.size()); }
  int voxel_node(int voxel_id) const { return voxel_nodes_[voxel_id]; }
  const OctreeNode& voxel(int voxel_id) const { return nodes_[voxel_nodes_[voxel_id]]; }
  std::span<const double> d() const { return d_; }
  /// Replaces the band values and refreshes the per-voxel gradients.
  void set_d(std::vector<double> d);
  /// Central-difference gradient of the band field at a voxel.
  const Vec3& voxel_gradient(int voxel_id) const { return gradients_[voxel_id]; }

  /// Leaf containing p, or -1 outside the bounds.
  int locate(const Vec3& p) const;
  /// Linear reconstruction of the field at p from its leaf (band leaves use
  /// their gradient; other leaves are piecewise constant).
  double interpolate(const Vec3& p) const;

  /// Node across the given face at the same level, or the coarser leaf that
  /// covers that region; found by bottom-up traversal. -1 outside bounds.
  /// The result may be an interior node when the neighbour is refined.
  int neighbor_node(int node, Axis axis, Direction direction) const;
  /// Band voxel adjacent across a face (same level, coarser, or the finer
  /// leaf touching the face), or empty when the neighbour is not in the band.
  std::optional<int> neighbor(int voxel_id, Axis axis, Direction direction) const;

  /// Splits a leaf into 8 empty children. Voxel ids become stale until
  /// `reassign_voxel_ids` runs.
  void split(int node);
  /// Sets a leaf's payload; band membership follows the narrow-band rule.
  void set_leaf(int node, double sdf);
  void set_leaf(int node, double sdf, bool band);
  /// Numbers band leaves contiguously in node order and rebuilds `d()`.
  void reassign_voxel_ids();

 private:
  void refresh_gradients();
  int compute_level() const;

  Cube bounds_;
  std::vector<OctreeNode> nodes_;
  std::vector<int> voxel_nodes_;
  std::vector<double> d_;
  std::vector<Vec3> gradients_;
  mutable int level_cache_ = -1;  // -1: stale
};

/// Uniform grid of 8^level leaves sampled from `field`.
SdfVolume build_volume(const Cube& bounds, int level,
                       const std::function<double(const Vec3&)>& field);

/// build_volume for a distance field (1-Lipschitz): nodes whose centre is
/// far enough from the zero set are kept as coarse non-band leaves. Band
/// voxels and their face neighbours are the same as in the uniform grid.
SdfVolume build_band_volume(const Cube& bounds, int level,
                            const std::function<double(const Vec3&)>& field);

/// 2^base_level band grid initialised with the signed distance transform
/// of `initial_mesh`. Throws InputError when the mesh leaves the bounds or the
/// resulting band is empty.
SdfVolume build_initial_volume(const TriangleMesh& initial_mesh, const Cube& bounds,
                               int base_level);

/// Splits every band leaf with |d| < 2 parent edges; children take the
/// parent's linear reconstruction and keep the band flag only inside the
/// tighter child band.
SdfVolume subdivide_band(const SdfVolume& volume);

/// True iff every band leaf projects to less than one pixel in every view
/// whose frustum contains it.
bool refinement_complete(const SdfVolume& volume, std::span<const PsView> views);
bool refinement_complete(const SdfVolume& volume, std::span<const Camera> cameras);

/// Binary leaf dump: "SDF1", bounds (centre xyz, half size; f64), level
/// (u32), leaf count (u64), then per leaf centre xyz, half size, sdf (f64)
/// and band flag (u8). Little-endian.
void write_volume_dump(const std::filesystem::path& path, const SdfVolume& volume);
SdfVolume read_volume_dump(const std::filesystem::path& path);

}  // namespace mvps
