#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mvps/bvh.hpp"
#include "mvps/camera.hpp"
#include "mvps/image.hpp"
#include "mvps/light.hpp"
#include "mvps/view.hpp"

namespace mvps {

struct SyntheticView {
  Camera camera;
  std::vector<PointLight> lights;
};

/// Known mesh plus capture rig. Per-vertex albedo on the mesh (first
/// channel) overrides the constant `albedo`.
struct SyntheticScene {
  std::string name;
  TriangleMesh ground_truth;
  std::vector<SyntheticView> views;
  double albedo = 0.8;
  double noise_sigma = 0.0;
  std::uint64_t seed = 1;
  Cube bounds;
  double object_radius = 20.0;
  int base_level = 6;
  int max_level = 7;

  /// Throws InputError when a light sits inside the ground truth.
  void validate() const;
};

struct RigOptions {
  int lights = 8;
  double ring_radius = 12.0;
  double brightness = 700.0;
  double mu = 1.0;
  double focal_length = 360.0;
  int width = 600;
  int height = 400;
};

/// Ring of `lights` LEDs around the lens in the image plane, aimed at `target`.
std::vector<PointLight> light_ring(const Camera& camera, const Vec3& target,
                                   const RigOptions& options);

/// Twelve cameras on the icosahedron vertex directions at `distance` from
/// `target`, each with a light ring.
std::vector<SyntheticView> icosahedral_rig(const Vec3& target, double distance,
                                           const RigOptions& options);

/// Presets: "plane", "sphere", "blob", "two-object", "occluder".
SyntheticScene make_scene(const std::string& preset, std::uint64_t seed = 7);
std::vector<std::string> scene_presets();

struct RenderStats {
  std::size_t surface_pairs = 0;    // (surface pixel, light)
  std::size_t shadowed_pairs = 0;   // segment to the light blocked by the mesh
  std::size_t cast_pairs = 0;       // ...while the shading normal faces the light

  double shadowed_fraction() const {
    return surface_pairs == 0 ? 0.0 : static_cast<double>(shadowed_pairs) / surface_pairs;
  }
  double cast_fraction() const {
    return surface_pairs == 0 ? 0.0 : static_cast<double>(cast_pairs) / surface_pairs;
  }
  RenderStats& operator+=(const RenderStats& other);
};

/// Ray-traced Lambertian renderer with exact cast shadows and interpolated
/// vertex normals.
class Renderer {
 public:
  explicit Renderer(const SyntheticScene& scene);

  struct ViewImages {
    std::vector<Image> images;  // one per light
    Mask silhouette;            // pixels whose primary ray hits the mesh
    RenderStats stats;
  };

  /// Every light of one view; primary rays are shared.
  ViewImages render_view(int view) const;
  Image render(int view, int light) const;
  Mask silhouette(int view) const;
  /// Oracle-mode views: float images, every mask valid.
  std::vector<PsView> render_all(RenderStats* stats = nullptr,
                                 std::vector<Mask>* silhouettes = nullptr) const;

  /// Noise-free radiance of surface point x with normal n under a light,
  /// zero when the segment to the light is blocked.
  double radiance(const Vec3& x, const Vec3& n, double albedo, const PointLight& light) const;
  /// Exact mesh test of the segment from a surface point to a light.
  bool shadowed(const Vec3& x, const PointLight& light) const;
  const TriangleBvh& bvh() const { return bvh_; }

 private:
  const SyntheticScene& scene_;
  TriangleBvh bvh_;
  std::vector<Vec3> normals_;
  double shadow_epsilon_;
};

/// Voxel grid of resolution^3 cells over `bounds`; a cell survives iff its
/// centre projects inside every silhouette. Surface from marching cubes on
/// the occupancy at level 0.5. Throws Error when nothing survives.
TriangleMesh voxel_carve(std::span<const Camera> cameras, std::span<const Mask> silhouettes,
                         const Cube& bounds, int resolution);

struct InitialEstimate {
  int triangles = 0;  // budget; 0 for the visual hull
  int noise_percent = 0;
  bool visual_hull = false;
  TriangleMesh mesh;

  std::string label() const;
};

struct Benchmark {
  SyntheticScene scene;
  std::vector<InitialEstimate> estimates;
};

inline constexpr std::array<int, 4> kBenchmarkBudgets{250, 500, 1500, 10000};
inline constexpr std::array<int, 3> kBenchmarkNoise{0, 5, 10};

/// Degraded initial estimates at every budget and noise level plus the
/// visual hull, all deterministic under `seed`.
Benchmark make_benchmark(const std::string& preset, std::uint64_t seed = 7);
/// One degraded estimate (decimate, then vertex noise).
TriangleMesh make_initial_estimate(const SyntheticScene& scene, int triangles, int noise_percent);
TriangleMesh make_visual_hull(const SyntheticScene& scene, int resolution = 96);

/// Renders the scene and writes a complete pipeline input into `dir`:
/// scene.json, 16-bit PNGs, ground_truth.ply and initial.ply.
std::filesystem::path export_scene(const SyntheticScene& scene, const TriangleMesh& initial,
                                   const std::filesystem::path& dir);

}  // namespace mvps
