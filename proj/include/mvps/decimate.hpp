#pragma once

#include <cstdint>

#include "mvps/mesh.hpp"

namespace mvps {

/// Quadric-error-metric edge-collapse decimation down to at most
/// `target_triangles` (or until no legal collapse remains). Collapses that
/// would break manifoldness or flip a face are rejected.
TriangleMesh decimate(const TriangleMesh& mesh, int target_triangles);

/// Decimates to about `target_triangles`, then perturbs every vertex with
/// isotropic Gaussian noise of standard deviation
/// `noise_fraction * average_edge_length`. Deterministic under `seed`.
TriangleMesh degrade_mesh(const TriangleMesh& mesh, int target_triangles, double noise_fraction,
                          std::uint64_t seed);

}  // namespace mvps
