#include "mvps/mesh.hpp"

#include <Eigen/Geometry>
#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <unordered_map>

namespace mvps {

void validate_mesh(const TriangleMesh& mesh) {
  const int n = static_cast<int>(mesh.vertices.size());
  for (const Vec3& v : mesh.vertices) {
    if (!v.allFinite()) {
      throw InputError("mesh: non-finite vertex");
    }
  }
  for (const Triangle& t : mesh.triangles) {
    for (int i : t) {
      if (i < 0 || i >= n) {
        throw InputError("mesh: triangle index out of range");
      }
    }
  }
  if (!mesh.albedo.empty() && mesh.albedo.size() != mesh.vertices.size()) {
    throw InputError("mesh: albedo count does not match vertex count");
  }
}

std::size_t remove_degenerate_triangles(TriangleMesh& mesh) {
  const std::size_t before = mesh.triangles.size();
  std::erase_if(mesh.triangles, [&](const Triangle& t) {
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) {
      return true;
    }
    const Vec3 c = (mesh.vertices[t[1]] - mesh.vertices[t[0]])
                       .cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]);
    return c.norm() == 0.0;
  });
  std::vector<int> remap(mesh.vertices.size(), -1);
  for (const Triangle& t : mesh.triangles) {
    for (int i : t) remap[i] = 0;
  }
  int next = 0;
  std::vector<Vec3> vertices;
  std::vector<Vec3> albedo;
  for (std::size_t i = 0; i < remap.size(); ++i) {
    if (remap[i] < 0) continue;
    remap[i] = next++;
    vertices.push_back(mesh.vertices[i]);
    if (mesh.has_albedo()) albedo.push_back(mesh.albedo[i]);
  }
  for (Triangle& t : mesh.triangles) {
    for (int& i : t) i = remap[i];
  }
  mesh.vertices = std::move(vertices);
  mesh.albedo = std::move(albedo);
  return before - mesh.triangles.size();
}

void check_orientation(const TriangleMesh& mesh) {
  // Each directed edge may appear at most once in a consistently oriented
  // manifold mesh.
  std::unordered_map<std::uint64_t, int> directed;
  directed.reserve(mesh.triangles.size() * 3);
  for (const Triangle& t : mesh.triangles) {
    for (int k = 0; k < 3; ++k) {
      const auto a = static_cast<std::uint64_t>(t[k]);
      const auto b = static_cast<std::uint64_t>(t[(k + 1) % 3]);
      if (++directed[(a << 32) | b] > 1) {
        throw InputError("mesh: inconsistent orientation or non-manifold edge");
      }
    }
  }
}

Vec3 face_normal(const TriangleMesh& mesh, int face) {
  const Triangle& t = mesh.triangles[face];
  const Vec3 c = (mesh.vertices[t[1]] - mesh.vertices[t[0]])
                     .cross(mesh.vertices[t[2]] - mesh.vertices[t[0]]);
  const double n = c.norm();
  return n > 0.0 ? Vec3(c / n) : Vec3::Zero();
}

double face_area(const TriangleMesh& mesh, int face) {
  const Triangle& t = mesh.triangles[face];
  return 0.5 * (mesh.vertices[t[1]] - mesh.vertices[t[0]])
                   .cross(mesh.vertices[t[2]] - mesh.vertices[t[0]])
                   .norm();
}

double surface_area(const TriangleMesh& mesh) {
  double a = 0.0;
  for (int f = 0; f < static_cast<int>(mesh.triangles.size()); ++f) {
    a += face_area(mesh, f);
  }
  return a;
}

double signed_volume(const TriangleMesh& mesh) {
  double v = 0.0;
  for (const Triangle& t : mesh.triangles) {
    v += mesh.vertices[t[0]].dot(mesh.vertices[t[1]].cross(mesh.vertices[t[2]]));
  }
  return v / 6.0;
}

double average_edge_length(const TriangleMesh& mesh) {
  if (mesh.triangles.empty()) return 0.0;
  double sum = 0.0;
  for (const Triangle& t : mesh.triangles) {
    for (int k = 0; k < 3; ++k) {
      sum += (mesh.vertices[t[k]] - mesh.vertices[t[(k + 1) % 3]]).norm();
    }
  }
  return sum / (3.0 * static_cast<double>(mesh.triangles.size()));
}

std::vector<Vec3> vertex_normals(const TriangleMesh& mesh) {
  std::vector<Vec3> normals(mesh.vertices.size(), Vec3::Zero());
  for (int f = 0; f < static_cast<int>(mesh.triangles.size()); ++f) {
    const Triangle& t = mesh.triangles[f];
    const Vec3 n = face_normal(mesh, f);
    for (int k = 0; k < 3; ++k) {
      const Vec3 e1 = mesh.vertices[t[(k + 1) % 3]] - mesh.vertices[t[k]];
      const Vec3 e2 = mesh.vertices[t[(k + 2) % 3]] - mesh.vertices[t[k]];
      const double denom = e1.norm() * e2.norm();
      if (denom <= 0.0) continue;
      const double angle = std::acos(std::clamp(e1.dot(e2) / denom, -1.0, 1.0));
      normals[t[k]] += angle * n;
    }
  }
  for (Vec3& n : normals) {
    const double len = n.norm();
    if (len > 0.0) n /= len;
  }
  return normals;
}

std::pair<Vec3, Vec3> bounding_box(const TriangleMesh& mesh) {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const Vec3& v : mesh.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  return {lo, hi};
}

TriangleMesh make_icosphere(int subdivisions, double radius, const Vec3& center) {
  const double phi = std::numbers::phi;
  TriangleMesh mesh;
  mesh.vertices = {{-1, phi, 0}, {1, phi, 0},  {-1, -phi, 0}, {1, -phi, 0},
                   {0, -1, phi}, {0, 1, phi},  {0, -1, -phi}, {0, 1, -phi},
                   {phi, 0, -1}, {phi, 0, 1},  {-phi, 0, -1}, {-phi, 0, 1}};
  for (Vec3& v : mesh.vertices) v.normalize();
  mesh.triangles = {{0, 11, 5}, {0, 5, 1},   {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                    {1, 5, 9},  {5, 11, 4},  {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                    {3, 9, 4},  {3, 4, 2},   {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                    {4, 9, 5},  {2, 4, 11},  {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> midpoints;
    auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = midpoints.find(key);
      if (it != midpoints.end()) return it->second;
      mesh.vertices.push_back((mesh.vertices[a] + mesh.vertices[b]).normalized());
      const int id = static_cast<int>(mesh.vertices.size()) - 1;
      midpoints.emplace(key, id);
      return id;
    };
    std::vector<Triangle> next;
    next.reserve(mesh.triangles.size() * 4);
    for (const Triangle& t : mesh.triangles) {
      const int ab = midpoint(t[0], t[1]);
      const int bc = midpoint(t[1], t[2]);
      const int ca = midpoint(t[2], t[0]);
      next.push_back({t[0], ab, ca});
      next.push_back({t[1], bc, ab});
      next.push_back({t[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    mesh.triangles = std::move(next);
  }
  for (Vec3& v : mesh.vertices) v = center + radius * v;
  return mesh;
}

TriangleMesh make_box(const Vec3& lo, const Vec3& hi) {
  TriangleMesh mesh;
  for (int i = 0; i < 8; ++i) {
    mesh.vertices.emplace_back((i & 1) ? hi.x() : lo.x(), (i & 2) ? hi.y() : lo.y(),
                               (i & 4) ? hi.z() : lo.z());
  }
  mesh.triangles = {{0, 2, 3}, {0, 3, 1},   // -z
                    {4, 5, 7}, {4, 7, 6},   // +z
                    {0, 1, 5}, {0, 5, 4},   // -y
                    {2, 6, 7}, {2, 7, 3},   // +y
                    {0, 4, 6}, {0, 6, 2},   // -x
                    {1, 3, 7}, {1, 7, 5}};  // +x
  return mesh;
}

void append_mesh(TriangleMesh& mesh, const TriangleMesh& other) {
  const bool keep_albedo = mesh.has_albedo() && other.has_albedo();
  const int offset = static_cast<int>(mesh.vertices.size());
  mesh.vertices.insert(mesh.vertices.end(), other.vertices.begin(), other.vertices.end());
  for (Triangle t : other.triangles) {
    for (int& i : t) i += offset;
    mesh.triangles.push_back(t);
  }
  if (keep_albedo) {
    mesh.albedo.insert(mesh.albedo.end(), other.albedo.begin(), other.albedo.end());
  } else {
    mesh.albedo.clear();
  }
}

}  // namespace mvps
