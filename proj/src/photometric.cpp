#include "mvps/photometric.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace mvps {

double attenuation(const PointLight& light, const Vec3& x) {
  const Vec3 l = x - light.position;
  const double r2 = l.squaredNorm();
  if (r2 == 0.0) throw Error("attenuation: point coincides with the light");
  const double cosine = std::max(light.direction.dot(l) / std::sqrt(r2), 0.0);
  return light.brightness * std::pow(cosine, light.mu) / r2;
}

Vec3 light_direction(const PointLight& light, const Vec3& x) {
  return (light.position - x).normalized();
}

double shade(const Vec3& x, const Vec3& normal, double albedo, const PointLight& light) {
  const double cosine = normal.dot(light_direction(light, x));
  if (cosine <= 0.0) return 0.0;
  return albedo * attenuation(light, x) * cosine;
}

Mask saturation_mask(const Image& image, double low, double high) {
  if (!(low >= 0.0 && low < high && high <= 1.0)) {
    throw InputError("saturation mask: require 0 <= low < high <= 1");
  }
  Mask mask(image.width, image.height, false);
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    const double v = image.pixels[i];
    mask.valid[i] = (v > low && v < high) ? 1 : 0;
  }
  return mask;
}

std::vector<LightPair> light_pairs(int light_count, Pairing pairing) {
  std::vector<LightPair> pairs;
  if (light_count < 2) return pairs;
  if (pairing == Pairing::Adjacent) {
    for (int h = 0; h < light_count; ++h) {
      const int k = (h + 1) % light_count;
      if (light_count == 2 && h == 1) break;
      pairs.push_back({h, k});
    }
    return pairs;
  }
  for (int h = 0; h < light_count; ++h) {
    for (int k = h + 1; k < light_count; ++k) pairs.push_back({h, k});
  }
  return pairs;
}

Vec3 ratio_vector(double i_h, double i_k, const PointLight& light_h, const PointLight& light_k,
                  const Vec3& x) {
  return i_h * attenuation(light_k, x) * light_direction(light_k, x) -
         i_k * attenuation(light_h, x) * light_direction(light_h, x);
}

std::optional<Vec3> ratio_vector(const PsView& view, LightPair pair, const Vec3& x,
                                 double darkness_floor) {
  const Projection p = view.camera.project(x);
  if (!p.in_frustum) return std::nullopt;
  const auto i_h = sample_image(view, pair.h, p.pixel);
  const auto i_k = sample_image(view, pair.k, p.pixel);
  if (!i_h || !i_k) return std::nullopt;
  if (*i_h < darkness_floor && *i_k < darkness_floor) return std::nullopt;
  return ratio_vector(*i_h, *i_k, view.lights[pair.h], view.lights[pair.k], x);
}

double visibility_weight(const Vec3& x, const Vec3& n_est, const PsView& view, LightPair pair,
                         const Occluder& occluder) {
  const Vec3 camera = view.camera.center();
  if (occluder.blocked(x, camera) || occluder.blocked(x, view.lights[pair.h].position) ||
      occluder.blocked(x, view.lights[pair.k].position)) {
    return 0.0;
  }
  const double norm = n_est.norm();
  if (norm == 0.0) return 0.0;
  return std::max(n_est.dot(view.camera.view_vector(x)) / norm, 0.0);
}

VoxelSystem assemble_voxel_system(std::span<const RatioEquation> equations, const Vec3& n_prior,
                                  double tau_rank) {
  VoxelSystem out;
  const double prior_norm = n_prior.norm();
  const Vec3 prior = prior_norm > 0.0 ? Vec3(n_prior / prior_norm) : Vec3(Vec3::UnitZ());

  Mat3 b = Mat3::Zero();
  for (const RatioEquation& e : equations) {
    const Vec3 wb = e.weight * e.b;
    b.noalias() += wb * wb.transpose();
  }
  Eigen::SelfAdjointEigenSolver<Mat3> eig(b);
  // Eigen returns ascending eigenvalues.
  const Vec3 ascending = eig.eigenvalues();
  out.eigenvalues = Vec3(ascending[2], ascending[1], ascending[0]);
  const double largest = out.eigenvalues[0];
  const double middle = out.eigenvalues[1];
  out.well_constrained = largest > 0.0 && middle > tau_rank * largest;
  if (!out.well_constrained) {
    out.b_prime = Mat3::Identity();
    out.q3 = prior;
    return out;
  }
  const Mat3& q = eig.eigenvectors();
  Vec3 corrected = ascending;
  corrected[0] = 0.0;
  Mat3 bp = q * corrected.asDiagonal() * q.transpose() + Mat3::Identity();
  out.b_prime = 0.5 * (bp + bp.transpose());
  Vec3 q3 = q.col(0).normalized();
  if (q3.dot(prior) < 0.0) q3 = -q3;
  out.q3 = q3;
  return out;
}

AlbedoEstimate recover_albedo(const TriangleMesh& mesh, std::span<const PsView> views,
                              const Occluder& occluder) {
  const std::vector<Vec3> normals = vertex_normals(mesh);
  AlbedoEstimate out;
  out.albedo.assign(mesh.vertices.size(), 0.0);
  out.visible.assign(mesh.vertices.size(), false);
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const Vec3& x = mesh.vertices[i];
    const Vec3& n = normals[i];
    double numerator = 0.0;
    double denominator = 0.0;
    for (const PsView& view : views) {
      const Projection p = view.camera.project(x);
      if (!p.in_frustum || n.dot(view.camera.view_vector(x)) <= 0.0) continue;
      if (occluder.blocked(x, view.camera.center())) continue;
      for (int k = 0; k < view.light_count(); ++k) {
        const PointLight& light = view.lights[k];
        const double model = attenuation(light, x) * std::max(n.dot(light_direction(light, x)), 0.0);
        if (model <= 0.0) continue;
        const auto intensity = sample_image(view, k, p.pixel);
        if (!intensity) continue;
        if (occluder.blocked(x, light.position)) continue;
        numerator += *intensity * model;
        denominator += model * model;
      }
    }
    if (denominator > 0.0) {
      out.albedo[i] = numerator / denominator;
      out.visible[i] = true;
    }
  }
  return out;
}

}  // namespace mvps
