#pragma once

#include <optional>
#include <span>
#include <vector>

#include "mvps/image.hpp"
#include "mvps/light.hpp"
#include "mvps/mesh.hpp"
#include "mvps/raycast.hpp"
#include "mvps/view.hpp"

namespace mvps {

inline constexpr double kDefaultSaturationLow = 0.01;
inline constexpr double kDefaultSaturationHigh = 0.98;
inline constexpr double kDefaultRankThreshold = 1e-4;

/// phi * max(s . (x - p) / |x - p|, 0)^mu / |x - p|^2. Throws at x == p.
double attenuation(const PointLight& light, const Vec3& x);

/// Unit vector from x towards the light.
Vec3 light_direction(const PointLight& light, const Vec3& x);

/// Lambertian near-field intensity albedo * a(x) * max(n . l, 0).
double shade(const Vec3& x, const Vec3& normal, double albedo, const PointLight& light);

/// Pixel valid iff low < value < high. Values at or below `low` are treated
/// as dark (shadow / background), at or above `high` as saturated.
Mask saturation_mask(const Image& image, double low = kDefaultSaturationLow,
                     double high = kDefaultSaturationHigh);

struct LightPair {
  int h = 0;
  int k = 1;
  friend bool operator==(const LightPair&, const LightPair&) = default;
};

enum class Pairing {
  All,       // every unordered pair, C(n, 2)
  Adjacent,  // ring neighbours (k, k+1 mod n); for speed studies
};

std::vector<LightPair> light_pairs(int light_count, Pairing pairing = Pairing::All);

/// b = i_h a_k l_k - i_k a_h l_h from already sampled intensities.
Vec3 ratio_vector(double i_h, double i_k, const PointLight& light_h, const PointLight& light_k,
                  const Vec3& x);

/// Samples both images at the projection of x. Empty when a sample is
/// invalid or both intensities sit below `darkness_floor`.
std::optional<Vec3> ratio_vector(const PsView& view, LightPair pair, const Vec3& x,
                                 double darkness_floor = kDefaultSaturationLow);

struct RatioEquation {
  Vec3 b = Vec3::Zero();
  double weight = 0.0;
  int view = 0;
  LightPair pair;
};

/// max(n . v, 0) when x sees the camera and both lights; 0 otherwise.
double visibility_weight(const Vec3& x, const Vec3& n_est, const PsView& view, LightPair pair,
                         const Occluder& occluder);

/// Rank-corrected normal equations of one voxel.
struct VoxelSystem {
  Mat3 b_prime = Mat3::Identity();
  Vec3 q3 = Vec3::UnitZ();
  bool well_constrained = false;
  Vec3 eigenvalues = Vec3::Zero();  // of B, descending
};

/// B = sum w^2 b b^T; zeroes the smallest eigenvalue and adds the identity.
/// q3 is the null direction oriented along `n_prior`. Voxels whose second
/// eigenvalue is not above `tau_rank` times the largest fall back to B' = I
/// and q3 = normalised prior.
VoxelSystem assemble_voxel_system(std::span<const RatioEquation> equations, const Vec3& n_prior,
                                  double tau_rank = kDefaultRankThreshold);

struct AlbedoEstimate {
  std::vector<double> albedo;  // per vertex; 0 where not visible
  std::vector<bool> visible;
};

/// Per-vertex least-squares albedo over every view and light that sees the
/// vertex: rho = sum(i m) / sum(m^2), m = a(x) max(n . l, 0).
AlbedoEstimate recover_albedo(const TriangleMesh& mesh, std::span<const PsView> views,
                              const Occluder& occluder);

}  // namespace mvps
