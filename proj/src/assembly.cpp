#include "mvps/assembly.hpp"

#include <array>
#include <optional>

namespace mvps {

AssemblyStats& AssemblyStats::operator+=(const AssemblyStats& other) {
  voxels += other.voxels;
  equations += other.equations;
  weighted_equations += other.weighted_equations;
  candidate_pairs += other.candidate_pairs;
  shadowed_pairs += other.shadowed_pairs;
  well_constrained += other.well_constrained;
  sampled_pixels += other.sampled_pixels;
  masked_pixels += other.masked_pixels;
  return *this;
}

namespace {

enum class Visibility : signed char { Unknown, Clear, Blocked };

}  // namespace

std::vector<RatioEquation> point_equations(const Vec3& x, const Vec3& n_est,
                                           std::span<const PsView> views,
                                           const Occluder& occluder,
                                           const AssemblyOptions& options,
                                           AssemblyStats* stats) {
  AssemblyStats local;
  std::vector<RatioEquation> out;
  const double n_norm = n_est.norm();
  std::vector<std::optional<double>> samples;
  std::vector<Visibility> lit;

  for (std::size_t q = 0; q < views.size(); ++q) {
    const PsView& view = views[q];
    const Projection p = view.camera.project(x);
    if (!p.in_frustum) continue;
    const int n_lights = view.light_count();
    samples.assign(n_lights, std::nullopt);
    for (int k = 0; k < n_lights; ++k) {
      samples[k] = sample_image(view, k, p.pixel);
      ++local.sampled_pixels;
      if (!samples[k]) ++local.masked_pixels;
    }

    const double facing =
        n_norm > 0.0 ? std::max(n_est.dot(view.camera.view_vector(x)) / n_norm, 0.0) : 0.0;
    Visibility camera = Visibility::Unknown;
    lit.assign(n_lights, Visibility::Unknown);
    auto clear = [&](Visibility& state, const Vec3& target) {
      if (state == Visibility::Unknown) {
        state = occluder.blocked(x, target) ? Visibility::Blocked : Visibility::Clear;
      }
      return state == Visibility::Clear;
    };

    for (const LightPair& pair : light_pairs(n_lights, options.pairing)) {
      const auto& i_h = samples[pair.h];
      const auto& i_k = samples[pair.k];
      if (!i_h || !i_k) continue;
      if (*i_h < options.darkness_floor && *i_k < options.darkness_floor) continue;
      RatioEquation eq;
      eq.b = ratio_vector(*i_h, *i_k, view.lights[pair.h], view.lights[pair.k], x);
      eq.view = static_cast<int>(q);
      eq.pair = pair;
      if (facing > 0.0) {
        ++local.candidate_pairs;
        if (clear(camera, view.camera.center()) &&
            clear(lit[pair.h], view.lights[pair.h].position) &&
            clear(lit[pair.k], view.lights[pair.k].position)) {
          eq.weight = facing;
          ++local.weighted_equations;
        } else {
          ++local.shadowed_pairs;
        }
      }
      out.push_back(eq);
      ++local.equations;
    }
  }
  if (stats) *stats += local;
  return out;
}

VolumeSystems assemble_volume(const SdfVolume& volume, std::span<const PsView> views,
                              const Occluder& occluder, const AssemblyOptions& options) {
  VolumeSystems out;
  out.systems.resize(volume.voxel_count());
  for (int v = 0; v < volume.voxel_count(); ++v) {
    const Vec3& x = volume.voxel(v).center;
    const Vec3& gradient = volume.voxel_gradient(v);
    const auto equations = point_equations(x, gradient, views, occluder, options, &out.stats);
    out.systems[v] = assemble_voxel_system(equations, gradient, options.tau_rank);
    if (out.systems[v].well_constrained) ++out.stats.well_constrained;
    ++out.stats.voxels;
  }
  return out;
}

}  // namespace mvps
