#include "mvps/synth.hpp"

#include <spdlog/spdlog.h>

#include <array>
#include <cmath>
#include <fmt/format.h>
#include <map>
#include <numbers>
#include <random>

#include "mvps/config.hpp"
#include "mvps/decimate.hpp"
#include "mvps/distance.hpp"
#include "mvps/marching_cubes.hpp"
#include "mvps/mesh_io.hpp"
#include "mvps/photometric.hpp"

namespace mvps {

namespace fs = std::filesystem;

namespace {

// Square patch [-half, half]^2 at height z, facing +z.
TriangleMesh make_square_patch(double half, double z, int cells) {
  TriangleMesh m;
  const int n = cells + 1;
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      m.vertices.emplace_back(-half + 2.0 * half * i / cells, -half + 2.0 * half * j / cells, z);
    }
  }
  for (int j = 0; j < cells; ++j) {
    for (int i = 0; i < cells; ++i) {
      const int a = j * n + i;
      m.triangles.push_back({a, a + 1, a + n + 1});
      m.triangles.push_back({a, a + n + 1, a + n});
    }
  }
  return m;
}

// Closed box [-half, half]^2 x [-depth, 0] tessellated into unit-ish cells
// with shared vertices, so smooth shading only bends normals in the rim ring.
TriangleMesh make_slab(double half, double depth) {
  TriangleMesh m;
  std::map<std::array<long long, 3>, int> index;
  auto vertex = [&](const Vec3& p) {
    const std::array<long long, 3> key{std::llround(p.x() * 1e6), std::llround(p.y() * 1e6),
                                       std::llround(p.z() * 1e6)};
    const auto [it, inserted] = index.try_emplace(key, static_cast<int>(m.vertices.size()));
    if (inserted) m.vertices.push_back(p);
    return it->second;
  };
  // Grid over origin + [0,1]u + [0,1]v; u x v points outward.
  auto face = [&](const Vec3& origin, const Vec3& u, const Vec3& v) {
    const int nu = std::max(1, static_cast<int>(std::lround(u.norm())));
    const int nv = std::max(1, static_cast<int>(std::lround(v.norm())));
    auto at = [&](int i, int j) { return vertex(origin + u * (double(i) / nu) + v * (double(j) / nv)); };
    for (int j = 0; j < nv; ++j) {
      for (int i = 0; i < nu; ++i) {
        const int a = at(i, j), b = at(i + 1, j), c = at(i + 1, j + 1), d = at(i, j + 1);
        m.triangles.push_back({a, b, c});
        m.triangles.push_back({a, c, d});
      }
    }
  };
  const double w = 2.0 * half;
  face(Vec3(-half, -half, 0), Vec3(w, 0, 0), Vec3(0, w, 0));
  face(Vec3(-half, -half, -depth), Vec3(0, w, 0), Vec3(w, 0, 0));
  face(Vec3(-half, -half, -depth), Vec3(w, 0, 0), Vec3(0, 0, depth));
  face(Vec3(-half, half, -depth), Vec3(0, 0, depth), Vec3(w, 0, 0));
  face(Vec3(-half, -half, -depth), Vec3(0, 0, depth), Vec3(0, w, 0));
  face(Vec3(half, -half, -depth), Vec3(0, w, 0), Vec3(0, 0, depth));
  return m;
}

TriangleMesh make_blob(double radius, const Vec3& center) {
  TriangleMesh m = make_icosphere(6, 1.0);
  for (Vec3& v : m.vertices) {
    const Vec3 u = v.normalized();
    const double r = radius * (1.0 + 0.035 * (std::sin(5.0 * u.x()) + std::sin(4.0 * u.y() + 1.0) +
                                              std::cos(6.0 * u.z())));
    v = center + r * u;
  }
  return m;
}

Vec3 pick_up(const Vec3& forward) {
  return std::abs(forward.normalized().z()) < 0.9 ? Vec3::UnitZ() : Vec3::UnitY();
}

std::seed_seq row_seed(std::uint64_t seed, int view, int light, int row) {
  return std::seed_seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                       static_cast<std::uint32_t>(view), static_cast<std::uint32_t>(light),
                       static_cast<std::uint32_t>(row)};
}

}  // namespace

void SyntheticScene::validate() const {
  if (ground_truth.empty()) throw InputError("scene " + name + ": empty ground truth");
  if (views.empty()) throw InputError("scene " + name + ": no views");
  const SignedDistance sdf(ground_truth);
  for (const SyntheticView& v : views) {
    for (const PointLight& l : v.lights) {
      l.validate();
      if (sdf(l.position) <= 0.0) throw InputError("scene " + name + ": light inside the surface");
    }
  }
}

std::vector<PointLight> light_ring(const Camera& camera, const Vec3& target,
                                   const RigOptions& options) {
  const Vec3 right = camera.rotation().row(0).transpose();
  const Vec3 down = camera.rotation().row(1).transpose();
  std::vector<PointLight> lights;
  for (int k = 0; k < options.lights; ++k) {
    const double theta = 2.0 * std::numbers::pi * k / options.lights;
    PointLight l;
    l.position = camera.center() +
                 options.ring_radius * (std::cos(theta) * right + std::sin(theta) * down);
    l.direction = (target - l.position).normalized();
    l.brightness = options.brightness;
    l.mu = options.mu;
    lights.push_back(l);
  }
  return lights;
}

std::vector<SyntheticView> icosahedral_rig(const Vec3& target, double distance,
                                           const RigOptions& options) {
  const double phi = std::numbers::phi;
  const std::array<Vec3, 12> dirs{Vec3(-1, phi, 0), Vec3(1, phi, 0),   Vec3(-1, -phi, 0),
                                  Vec3(1, -phi, 0), Vec3(0, -1, phi),  Vec3(0, 1, phi),
                                  Vec3(0, -1, -phi), Vec3(0, 1, -phi), Vec3(phi, 0, -1),
                                  Vec3(phi, 0, 1),  Vec3(-phi, 0, -1), Vec3(-phi, 0, 1)};
  std::vector<SyntheticView> views;
  for (const Vec3& d : dirs) {
    const Vec3 u = d.normalized();
    Camera camera = Camera::look_at(target + distance * u, target, pick_up(u),
                                    options.focal_length, options.width, options.height);
    std::vector<PointLight> lights = light_ring(camera, target, options);
    views.push_back({std::move(camera), std::move(lights)});
  }
  return views;
}

std::vector<std::string> scene_presets() {
  return {"plane", "sphere", "blob", "two-object", "occluder"};
}

SyntheticScene make_scene(const std::string& preset, std::uint64_t seed) {
  SyntheticScene s;
  s.name = preset;
  s.seed = seed;
  s.bounds = Cube{Vec3::Zero(), 24.0};
  RigOptions rig;
  if (preset == "sphere") {
    s.ground_truth = make_icosphere(6, 20.0);
    s.views = icosahedral_rig(Vec3::Zero(), 45.0, rig);
  } else if (preset == "blob") {
    s.ground_truth = make_blob(20.0, Vec3::Zero());
    rig.brightness = 600.0;
    s.views = icosahedral_rig(Vec3::Zero(), 45.0, rig);
  } else if (preset == "two-object") {
    s.ground_truth = make_icosphere(6, 11.0, Vec3(-9.5, 0.0, 0.0));
    append_mesh(s.ground_truth, make_blob(8.0, Vec3(11.0, 0.0, 2.0)));
    rig.ring_radius = 25.0;
    rig.brightness = 900.0;
    s.views = icosahedral_rig(Vec3::Zero(), 45.0, rig);
    s.object_radius = 20.0;
    s.base_level = 7;
    s.max_level = 7;
  } else if (preset == "plane" || preset == "occluder") {
    if (preset == "plane") {
      s.ground_truth = make_square_patch(20.0, 0.0, 40);
    } else {
      // Watertight so that the sign of the distance field means inside/outside
      // everywhere a ray can pass.
      s.ground_truth = make_slab(20.0, 4.0);
      append_mesh(s.ground_truth, make_box(Vec3(-4, -4, 6), Vec3(4, 4, 12)));
    }
    rig.brightness = 1400.0;
    const std::array<Vec3, 5> eyes{Vec3(0, 0, 45), Vec3(22.5, 0, 39), Vec3(-22.5, 0, 39),
                                   Vec3(0, 22.5, 39), Vec3(0, -22.5, 39)};
    for (const Vec3& eye : eyes) {
      Camera camera = Camera::look_at(eye, Vec3::Zero(), pick_up(eye), rig.focal_length,
                                      rig.width, rig.height);
      std::vector<PointLight> lights = light_ring(camera, Vec3::Zero(), rig);
      s.views.push_back({std::move(camera), std::move(lights)});
    }
    s.base_level = 6;
    s.max_level = 7;
  } else {
    throw InputError("unknown scene preset \"" + preset + "\"");
  }
  return s;
}

RenderStats& RenderStats::operator+=(const RenderStats& other) {
  surface_pairs += other.surface_pairs;
  shadowed_pairs += other.shadowed_pairs;
  cast_pairs += other.cast_pairs;
  return *this;
}

Renderer::Renderer(const SyntheticScene& scene)
    : scene_(scene),
      bvh_(scene.ground_truth),
      normals_(vertex_normals(scene.ground_truth)),
      shadow_epsilon_(1e-3) {}

bool Renderer::shadowed(const Vec3& x, const PointLight& light) const {
  const Vec3 to_light = light.position - x;
  const double length = to_light.norm();
  return bvh_.any_hit(x, to_light / length, shadow_epsilon_, length - shadow_epsilon_);
}

double Renderer::radiance(const Vec3& x, const Vec3& n, double albedo,
                          const PointLight& light) const {
  const double value = shade(x, n, albedo, light);
  if (value <= 0.0 || shadowed(x, light)) return 0.0;
  return value;
}

Mask Renderer::silhouette(int view) const {
  const Camera& camera = scene_.views.at(view).camera;
  Mask mask(camera.width(), camera.height(), false);
  for (int y = 0; y < camera.height(); ++y) {
    for (int x = 0; x < camera.width(); ++x) {
      const Vec3 dir = camera.ray_direction(Vec2(x, y));
      mask.set(x, y, bvh_.any_hit(camera.center(), dir, 0.0, 1e30));
    }
  }
  return mask;
}

Renderer::ViewImages Renderer::render_view(int view) const {
  const SyntheticView& v = scene_.views.at(view);
  const Camera& camera = v.camera;
  const TriangleMesh& mesh = scene_.ground_truth;
  const int n_lights = static_cast<int>(v.lights.size());
  ViewImages out;
  out.images.assign(n_lights, Image(camera.width(), camera.height(), 0.0f));
  out.silhouette = Mask(camera.width(), camera.height(), false);

  for (int y = 0; y < camera.height(); ++y) {
    for (int x = 0; x < camera.width(); ++x) {
      const Vec3 dir = camera.ray_direction(Vec2(x, y));
      const auto hit = bvh_.intersect(camera.center(), dir, 0.0, 1e30);
      if (!hit) continue;
      out.silhouette.set(x, y, true);
      const Triangle& t = mesh.triangles[hit->face];
      const double b0 = 1.0 - hit->b1 - hit->b2;
      const Vec3 p = camera.center() + hit->t * dir;
      const Vec3 n =
          (b0 * normals_[t[0]] + hit->b1 * normals_[t[1]] + hit->b2 * normals_[t[2]]).normalized();
      const double albedo = mesh.has_albedo() ? b0 * mesh.albedo[t[0]].x() +
                                                    hit->b1 * mesh.albedo[t[1]].x() +
                                                    hit->b2 * mesh.albedo[t[2]].x()
                                              : scene_.albedo;
      for (int k = 0; k < n_lights; ++k) {
        const PointLight& light = v.lights[k];
        ++out.stats.surface_pairs;
        const bool blocked = shadowed(p, light);
        const double value = shade(p, n, albedo, light);
        if (blocked) {
          ++out.stats.shadowed_pairs;
          if (value > 0.0) ++out.stats.cast_pairs;
          continue;
        }
        out.images[k].at(x, y) = static_cast<float>(value);
      }
    }
  }

  if (scene_.noise_sigma > 0.0) {
    for (int k = 0; k < n_lights; ++k) {
      for (int y = 0; y < camera.height(); ++y) {
        auto seq = row_seed(scene_.seed, view, k, y);
        std::mt19937_64 rng(seq);
        std::normal_distribution<double> noise(0.0, scene_.noise_sigma);
        for (int x = 0; x < camera.width(); ++x) {
          float& px = out.images[k].at(x, y);
          px = static_cast<float>(std::clamp(px + noise(rng), 0.0, 1.0));
        }
      }
    }
  }
  return out;
}

Image Renderer::render(int view, int light) const {
  ViewImages all = render_view(view);
  return std::move(all.images.at(light));
}

std::vector<PsView> Renderer::render_all(RenderStats* stats, std::vector<Mask>* silhouettes) const {
  std::vector<PsView> views;
  for (std::size_t q = 0; q < scene_.views.size(); ++q) {
    ViewImages images = render_view(static_cast<int>(q));
    if (stats) *stats += images.stats;
    if (silhouettes) silhouettes->push_back(images.silhouette);
    PsView view{scene_.views[q].camera, scene_.views[q].lights, std::move(images.images), {}};
    view.valid_masks.assign(view.lights.size(), Mask(view.camera.width(), view.camera.height()));
    views.push_back(std::move(view));
  }
  return views;
}

TriangleMesh voxel_carve(std::span<const Camera> cameras, std::span<const Mask> silhouettes,
                         const Cube& bounds, int resolution) {
  if (cameras.empty() || cameras.size() != silhouettes.size()) {
    throw InputError("voxel_carve: need one silhouette per camera");
  }
  if (resolution < 1) throw InputError("voxel_carve: resolution must be positive");
  const double spacing = bounds.edge() / resolution;
  const int n = resolution + 2;  // one empty layer of padding on every side
  std::vector<double> values(static_cast<std::size_t>(n) * n * n, 0.5);
  const Vec3 origin = bounds.min() - Vec3::Constant(0.5 * spacing);
  std::size_t kept = 0;
  for (int k = 1; k <= resolution; ++k) {
    for (int j = 1; j <= resolution; ++j) {
      for (int i = 1; i <= resolution; ++i) {
        const Vec3 c = origin + spacing * Vec3(i, j, k);
        bool inside = true;
        for (std::size_t q = 0; q < cameras.size() && inside; ++q) {
          const Projection p = cameras[q].project(c);
          const long px = std::lround(p.pixel.x());
          const long py = std::lround(p.pixel.y());
          inside = p.in_frustum && px >= 0 && py >= 0 && px < silhouettes[q].width &&
                   py < silhouettes[q].height && silhouettes[q].at(px, py);
        }
        if (inside) {
          values[(static_cast<std::size_t>(k) * n + j) * n + i] = -0.5;
          ++kept;
        }
      }
    }
  }
  if (kept == 0) throw Error("voxel_carve: empty visual hull");
  return marching_cubes_grid(values, {n, n, n}, origin, spacing, 0.0);
}

std::string InitialEstimate::label() const {
  if (visual_hull) return "visual_hull";
  return fmt::format("tri{}_noise{}", triangles, noise_percent);
}

TriangleMesh make_initial_estimate(const SyntheticScene& scene, int triangles, int noise_percent) {
  const std::uint64_t seed = scene.seed * 1000003ULL + static_cast<std::uint64_t>(triangles) * 101ULL +
                             static_cast<std::uint64_t>(noise_percent);
  return degrade_mesh(scene.ground_truth, triangles, noise_percent / 100.0, seed);
}

TriangleMesh make_visual_hull(const SyntheticScene& scene, int resolution) {
  const Renderer renderer(scene);
  std::vector<Camera> cameras;
  std::vector<Mask> masks;
  for (std::size_t q = 0; q < scene.views.size(); ++q) {
    cameras.push_back(scene.views[q].camera);
    masks.push_back(renderer.silhouette(static_cast<int>(q)));
  }
  return voxel_carve(cameras, masks, scene.bounds, resolution);
}

Benchmark make_benchmark(const std::string& preset, std::uint64_t seed) {
  if (preset != "sphere" && preset != "blob" && preset != "two-object") {
    throw InputError("benchmark preset must be sphere, blob or two-object");
  }
  Benchmark b{make_scene(preset, seed), {}};
  for (int noise : kBenchmarkNoise) {
    for (int budget : kBenchmarkBudgets) {
      b.estimates.push_back({budget, noise, false, make_initial_estimate(b.scene, budget, noise)});
    }
  }
  b.estimates.push_back({0, 0, true, make_visual_hull(b.scene)});
  return b;
}

fs::path export_scene(const SyntheticScene& scene, const TriangleMesh& initial, const fs::path& dir) {
  fs::create_directories(dir / "images");
  const Renderer renderer(scene);
  SceneConfig config;
  config.volume = scene.bounds;
  config.solver.base_level = scene.base_level;
  config.solver.max_level = scene.max_level;
  RenderStats stats;
  for (std::size_t q = 0; q < scene.views.size(); ++q) {
    Renderer::ViewImages images = renderer.render_view(static_cast<int>(q));
    stats += images.stats;
    ViewConfig view{scene.views[q].camera, {}};
    for (std::size_t k = 0; k < images.images.size(); ++k) {
      const fs::path image = dir / "images" / fmt::format("view{:02}_light{}.png", q, k);
      write_png16(image, images.images[k]);
      view.lights.push_back({scene.views[q].lights[k], image});
    }
    config.views.push_back(std::move(view));
  }
  write_mesh(dir / "ground_truth.ply", scene.ground_truth);
  write_mesh(dir / "initial.ply", initial);
  config.initial_mesh = dir / "initial.ply";
  config.ground_truth = dir / "ground_truth.ply";
  config.output.mesh = dir / "reconstruction.ply";
  config.output.report = dir / "report.json";
  const fs::path path = dir / "scene.json";
  save_config(config, path);
  spdlog::info("rendered {} ({} views): {:.1f}% of surface/light pairs in shadow", scene.name,
               scene.views.size(), 100.0 * stats.shadowed_fraction());
  return path;
}

}  // namespace mvps
