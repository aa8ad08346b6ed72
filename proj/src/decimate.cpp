#include "mvps/decimate.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <queue>
#include <random>

namespace mvps {

namespace {

using Quadric = Eigen::Matrix4d;

struct Candidate {
  double cost;
  int u;
  int v;
  unsigned stamp_u;
  unsigned stamp_v;
  Vec3 target;

  bool operator>(const Candidate& o) const {
    if (cost != o.cost) return cost > o.cost;
    if (u != o.u) return u > o.u;
    return v > o.v;
  }
};

class Decimator {
 public:
  explicit Decimator(const TriangleMesh& mesh)
      : positions_(mesh.vertices),
        faces_(mesh.triangles),
        face_alive_(mesh.triangles.size(), 1),
        vertex_alive_(mesh.vertices.size(), 1),
        stamps_(mesh.vertices.size(), 0),
        quadrics_(mesh.vertices.size(), Quadric::Zero()),
        vertex_faces_(mesh.vertices.size()),
        live_faces_(static_cast<int>(mesh.triangles.size())) {
    for (int f = 0; f < static_cast<int>(faces_.size()); ++f) {
      const Triangle& t = faces_[f];
      const Vec3 c = (positions_[t[1]] - positions_[t[0]]).cross(positions_[t[2]] - positions_[t[0]]);
      const double norm = c.norm();
      if (norm > 0.0) {
        const Vec3 n = c / norm;
        Eigen::Vector4d plane(n.x(), n.y(), n.z(), -n.dot(positions_[t[0]]));
        const Quadric k = (0.5 * norm) * plane * plane.transpose();
        for (int v : t) quadrics_[v] += k;
      }
      for (int v : t) vertex_faces_[v].push_back(f);
    }
    for (int f = 0; f < static_cast<int>(faces_.size()); ++f) {
      const Triangle& t = faces_[f];
      for (int k = 0; k < 3; ++k) {
        const int a = t[k];
        const int b = t[(k + 1) % 3];
        if (a < b) push(a, b);
      }
    }
  }

  void run(int target) {
    while (live_faces_ > target && !heap_.empty()) {
      const Candidate c = heap_.top();
      heap_.pop();
      if (!vertex_alive_[c.u] || !vertex_alive_[c.v] || stamps_[c.u] != c.stamp_u ||
          stamps_[c.v] != c.stamp_v) {
        continue;
      }
      collapse(c.u, c.v, c.target);
    }
  }

  TriangleMesh result() const {
    TriangleMesh out;
    std::vector<int> remap(positions_.size(), -1);
    for (int f = 0; f < static_cast<int>(faces_.size()); ++f) {
      if (!face_alive_[f]) continue;
      Triangle t = faces_[f];
      for (int& v : t) {
        if (remap[v] < 0) {
          remap[v] = static_cast<int>(out.vertices.size());
          out.vertices.push_back(positions_[v]);
        }
        v = remap[v];
      }
      out.triangles.push_back(t);
    }
    return out;
  }

 private:
  double cost_at(const Quadric& q, const Vec3& p) const {
    const Eigen::Vector4d h(p.x(), p.y(), p.z(), 1.0);
    return std::max(0.0, h.dot(q * h));
  }

  void push(int u, int v) {
    const Quadric q = quadrics_[u] + quadrics_[v];
    const Mat3 a = q.topLeftCorner<3, 3>();
    const Vec3 b = q.topRightCorner<3, 1>();
    Vec3 target;
    double cost;
    Eigen::FullPivLU<Mat3> lu(a);
    lu.setThreshold(1e-10);
    if (lu.isInvertible()) {
      target = lu.solve(-b);
      cost = cost_at(q, target);
    } else {
      const Vec3 mid = 0.5 * (positions_[u] + positions_[v]);
      target = positions_[u];
      cost = cost_at(q, target);
      for (const Vec3& p : {positions_[v], mid}) {
        const double c = cost_at(q, p);
        if (c < cost) {
          cost = c;
          target = p;
        }
      }
    }
    heap_.push(Candidate{cost, u, v, stamps_[u], stamps_[v], target});
  }

  std::vector<int> neighbors(int v) const {
    std::vector<int> out;
    for (int f : vertex_faces_[v]) {
      for (int w : faces_[f]) {
        if (w != v) out.push_back(w);
      }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  bool shares(int f, int v) const {
    const Triangle& t = faces_[f];
    return t[0] == v || t[1] == v || t[2] == v;
  }

  bool collapse(int u, int v, const Vec3& target) {
    if (live_faces_ <= 4) return false;
    // Link condition: common neighbours are exactly the apexes of the faces
    // spanning the edge.
    std::vector<int> apexes;
    for (int f : vertex_faces_[u]) {
      if (!shares(f, v)) continue;
      for (int w : faces_[f]) {
        if (w != u && w != v) apexes.push_back(w);
      }
    }
    if (apexes.empty()) return false;
    std::sort(apexes.begin(), apexes.end());
    const std::vector<int> nu = neighbors(u);
    const std::vector<int> nv = neighbors(v);
    std::vector<int> common;
    std::set_intersection(nu.begin(), nu.end(), nv.begin(), nv.end(), std::back_inserter(common));
    if (common != apexes) return false;

    // Reject collapses that flip or squash surviving faces.
    for (int moving : {u, v}) {
      const int other = moving == u ? v : u;
      for (int f : vertex_faces_[moving]) {
        if (shares(f, other)) continue;
        const Triangle& t = faces_[f];
        std::array<Vec3, 3> p{positions_[t[0]], positions_[t[1]], positions_[t[2]]};
        const Vec3 before = (p[1] - p[0]).cross(p[2] - p[0]);
        for (int k = 0; k < 3; ++k) {
          if (t[k] == moving) p[k] = target;
        }
        const Vec3 after = (p[1] - p[0]).cross(p[2] - p[0]);
        if (after.norm() <= 1e-12 * before.norm() ||
            before.dot(after) < 0.2 * before.norm() * after.norm()) {
          return false;
        }
      }
    }

    for (int f : vertex_faces_[v]) {
      if (shares(f, u)) {
        face_alive_[f] = 0;
        --live_faces_;
        continue;
      }
      for (int& w : faces_[f]) {
        if (w == v) w = u;
      }
      vertex_faces_[u].push_back(f);
    }
    std::erase_if(vertex_faces_[u], [&](int f) { return !face_alive_[f]; });
    std::sort(vertex_faces_[u].begin(), vertex_faces_[u].end());
    vertex_faces_[u].erase(std::unique(vertex_faces_[u].begin(), vertex_faces_[u].end()),
                           vertex_faces_[u].end());
    vertex_faces_[v].clear();
    for (int w : apexes) {
      std::erase_if(vertex_faces_[w], [&](int f) { return !face_alive_[f]; });
    }
    vertex_alive_[v] = 0;
    positions_[u] = target;
    quadrics_[u] += quadrics_[v];
    ++stamps_[u];
    ++stamps_[v];
    for (int w : neighbors(u)) {
      if (u < w) push(u, w);
      else push(w, u);
    }
    return true;
  }

  std::vector<Vec3> positions_;
  std::vector<Triangle> faces_;
  std::vector<std::uint8_t> face_alive_;
  std::vector<std::uint8_t> vertex_alive_;
  std::vector<unsigned> stamps_;
  std::vector<Quadric> quadrics_;
  std::vector<std::vector<int>> vertex_faces_;
  int live_faces_;
  std::priority_queue<Candidate, std::vector<Candidate>, std::greater<>> heap_;
};

}  // namespace

TriangleMesh decimate(const TriangleMesh& mesh, int target_triangles) {
  if (target_triangles < 4) {
    throw InputError("decimation target below tetrahedron complexity (4 triangles)");
  }
  validate_mesh(mesh);
  if (target_triangles >= static_cast<int>(mesh.triangles.size())) {
    return mesh;
  }
  Decimator decimator(mesh);
  decimator.run(target_triangles);
  return decimator.result();
}

TriangleMesh degrade_mesh(const TriangleMesh& mesh, int target_triangles, double noise_fraction,
                          std::uint64_t seed) {
  if (!(noise_fraction >= 0.0)) throw InputError("degrade_mesh: noise fraction must be >= 0");
  TriangleMesh out = decimate(mesh, target_triangles);
  if (noise_fraction == 0.0) return out;
  const double sigma = noise_fraction * average_edge_length(out);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, sigma);
  for (Vec3& v : out.vertices) {
    v += Vec3(gauss(rng), gauss(rng), gauss(rng));
  }
  return out;
}

}  // namespace mvps
