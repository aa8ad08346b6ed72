#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mvps/octree.hpp"
#include "mvps/photometric.hpp"

namespace mvps {

struct AssemblyOptions {
  Pairing pairing = Pairing::All;
  double darkness_floor = kDefaultSaturationLow;
  double tau_rank = kDefaultRankThreshold;
};

struct AssemblyStats {
  std::size_t voxels = 0;
  std::size_t equations = 0;           // emitted RatioEquations, zero weights included
  std::size_t weighted_equations = 0;  // w > 0
  std::size_t candidate_pairs = 0;     // pairs with a valid sample, camera side facing
  std::size_t shadowed_pairs = 0;      // candidates zeroed by a blocked segment
  std::size_t well_constrained = 0;
  std::size_t sampled_pixels = 0;      // (voxel, view, light) projections inside a frustum
  std::size_t masked_pixels = 0;       // ...of which the sample was invalid

  double shadowed_fraction() const {
    return candidate_pairs == 0 ? 0.0 : static_cast<double>(shadowed_pairs) / candidate_pairs;
  }
  double masked_fraction() const {
    return sampled_pixels == 0 ? 0.0 : static_cast<double>(masked_pixels) / sampled_pixels;
  }
  AssemblyStats& operator+=(const AssemblyStats& other);
};

/// Ratio equations of a point over every view and light pair. Light pairs
/// use the view's pairing; raycasts run only where the weight could be
/// nonzero.
std::vector<RatioEquation> point_equations(const Vec3& x, const Vec3& n_est,
                                           std::span<const PsView> views,
                                           const Occluder& occluder,
                                           const AssemblyOptions& options,
                                           AssemblyStats* stats = nullptr);

struct VolumeSystems {
  std::vector<VoxelSystem> systems;  // by voxel id
  AssemblyStats stats;
};

/// Per-voxel systems at the band voxel centres, with the current voxel
/// gradients as normal estimates and priors.
VolumeSystems assemble_volume(const SdfVolume& volume, std::span<const PsView> views,
                              const Occluder& occluder, const AssemblyOptions& options);

}  // namespace mvps
