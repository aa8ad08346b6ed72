#pragma once

#include <array>
#include <span>

#include "mvps/mesh.hpp"
#include "mvps/octree.hpp"

namespace mvps {

/// Marching cubes over a dense lattice of `dims` samples (x fastest) placed
/// at origin + index * spacing. Inside is value < iso; triangles face outward
/// (towards larger values). Vertices on shared edges are welded.
TriangleMesh marching_cubes_grid(std::span<const double> values, const std::array<int, 3>& dims,
                                 const Vec3& origin, double spacing, double iso = 0.0);

/// Zero level set of the volume. Cells live on the lattice of finest-level
/// leaf centres; lattice values inside coarser leaves come from that leaf's
/// linear reconstruction, so faces across level transitions share vertices
/// and the result is crack-free. Empty (with a warning) when d never crosses
/// zero.
TriangleMesh extract_mesh(const SdfVolume& volume);

}  // namespace mvps
