#include "mvps/bvh.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace mvps {

namespace {

constexpr int kLeafSize = 4;

bool ray_box(const Vec3& origin, const Vec3& inv_dir, const Vec3& lo, const Vec3& hi,
             double t_min, double t_max, double& t_entry) {
  double t0 = t_min;
  double t1 = t_max;
  for (int a = 0; a < 3; ++a) {
    double near = (lo[a] - origin[a]) * inv_dir[a];
    double far = (hi[a] - origin[a]) * inv_dir[a];
    if (near > far) std::swap(near, far);
    // NaN from 0 * inf leaves the interval unchanged.
    if (near > t0) t0 = near;
    if (far < t1) t1 = far;
    if (t0 > t1) return false;
  }
  t_entry = t0;
  return true;
}

double box_squared_distance(const Vec3& p, const Vec3& lo, const Vec3& hi) {
  const Vec3 d = (lo - p).cwiseMax(p - hi).cwiseMax(0.0);
  return d.squaredNorm();
}

// Moller-Trumbore.
bool intersect_triangle(const Vec3& origin, const Vec3& dir, const Vec3& a, const Vec3& b,
                        const Vec3& c, double& t, double& u, double& v) {
  const Vec3 e1 = b - a;
  const Vec3 e2 = c - a;
  const Vec3 p = dir.cross(e2);
  const double det = e1.dot(p);
  if (std::abs(det) < 1e-300) return false;
  const double inv = 1.0 / det;
  const Vec3 s = origin - a;
  u = s.dot(p) * inv;
  if (u < 0.0 || u > 1.0) return false;
  const Vec3 q = s.cross(e1);
  v = dir.dot(q) * inv;
  if (v < 0.0 || u + v > 1.0) return false;
  t = e2.dot(q) * inv;
  return true;
}

}  // namespace

ClosestPoint closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b,
                                       const Vec3& c) {
  // Voronoi-region walk (Ericson, Real-Time Collision Detection 5.1.5).
  ClosestPoint out;
  const Vec3 ab = b - a;
  const Vec3 ac = c - a;
  const Vec3 ap = p - a;
  const double d1 = ab.dot(ap);
  const double d2 = ac.dot(ap);
  auto finish = [&](const Vec3& q, Feature f, int idx) {
    out.point = q;
    out.squared_distance = (p - q).squaredNorm();
    out.feature = f;
    out.local_index = idx;
    return out;
  };
  if (d1 <= 0.0 && d2 <= 0.0) return finish(a, Feature::Vertex, 0);
  const Vec3 bp = p - b;
  const double d3 = ab.dot(bp);
  const double d4 = ac.dot(bp);
  if (d3 >= 0.0 && d4 <= d3) return finish(b, Feature::Vertex, 1);
  const double vc = d1 * d4 - d3 * d2;
  if (vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0) {
    const double v = d1 / (d1 - d3);
    return finish(a + v * ab, Feature::Edge, 0);
  }
  const Vec3 cp = p - c;
  const double d5 = ab.dot(cp);
  const double d6 = ac.dot(cp);
  if (d6 >= 0.0 && d5 <= d6) return finish(c, Feature::Vertex, 2);
  const double vb = d5 * d2 - d1 * d6;
  if (vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0) {
    const double w = d2 / (d2 - d6);
    return finish(a + w * ac, Feature::Edge, 2);
  }
  const double va = d3 * d6 - d5 * d4;
  if (va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0) {
    const double w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return finish(b + w * (c - b), Feature::Edge, 1);
  }
  const double denom = 1.0 / (va + vb + vc);
  const double v = vb * denom;
  const double w = vc * denom;
  return finish(a + ab * v + ac * w, Feature::Face, 0);
}

TriangleBvh::TriangleBvh(TriangleMesh mesh) : mesh_(std::move(mesh)) {
  const int n = static_cast<int>(mesh_.triangles.size());
  order_.resize(n);
  std::vector<Vec3> centroids(n);
  for (int i = 0; i < n; ++i) {
    order_[i] = i;
    const Triangle& t = mesh_.triangles[i];
    centroids[i] = (mesh_.vertices[t[0]] + mesh_.vertices[t[1]] + mesh_.vertices[t[2]]) / 3.0;
  }
  if (n > 0) {
    nodes_.reserve(2 * n / kLeafSize + 1);
    build(0, n, centroids);
  }
}

int TriangleBvh::build(int begin, int end, std::vector<Vec3>& centroids) {
  const int index = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  Vec3 clo = lo;
  Vec3 chi = hi;
  for (int i = begin; i < end; ++i) {
    const Triangle& t = mesh_.triangles[order_[i]];
    for (int v : t) {
      lo = lo.cwiseMin(mesh_.vertices[v]);
      hi = hi.cwiseMax(mesh_.vertices[v]);
    }
    clo = clo.cwiseMin(centroids[order_[i]]);
    chi = chi.cwiseMax(centroids[order_[i]]);
  }
  nodes_[index].lo = lo;
  nodes_[index].hi = hi;
  if (end - begin <= kLeafSize) {
    nodes_[index].begin = begin;
    nodes_[index].end = end;
    return index;
  }
  int axis = 0;
  (chi - clo).maxCoeff(&axis);
  const int mid = (begin + end) / 2;
  std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                   [&](int a, int b) { return centroids[a][axis] < centroids[b][axis]; });
  const int left = build(begin, mid, centroids);
  const int right = build(mid, end, centroids);
  nodes_[index].left = left;
  nodes_[index].right = right;
  return index;
}

template <bool AnyHit>
std::optional<RayHit> TriangleBvh::traverse(const Vec3& origin, const Vec3& direction,
                                            double t_min, double t_max) const {
  if (nodes_.empty()) return std::nullopt;
  const Vec3 inv_dir = direction.cwiseInverse();
  std::optional<RayHit> best;
  double best_t = t_max;
  std::array<int, 64> stack;
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    double entry;
    if (!ray_box(origin, inv_dir, node.lo, node.hi, t_min, best_t, entry)) continue;
    if (node.left < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        const int f = order_[i];
        const Triangle& tri = mesh_.triangles[f];
        double t, u, v;
        if (intersect_triangle(origin, direction, mesh_.vertices[tri[0]],
                               mesh_.vertices[tri[1]], mesh_.vertices[tri[2]], t, u, v) &&
            t > t_min && t < best_t) {
          best_t = t;
          best = RayHit{t, f, u, v};
          if constexpr (AnyHit) return best;
        }
      }
      continue;
    }
    stack[top++] = node.left;
    stack[top++] = node.right;
  }
  return best;
}

std::optional<RayHit> TriangleBvh::intersect(const Vec3& origin, const Vec3& direction,
                                             double t_min, double t_max) const {
  return traverse<false>(origin, direction, t_min, t_max);
}

bool TriangleBvh::any_hit(const Vec3& origin, const Vec3& direction, double t_min,
                          double t_max) const {
  return traverse<true>(origin, direction, t_min, t_max).has_value();
}

ClosestPoint TriangleBvh::closest_point(const Vec3& p) const {
  ClosestPoint best;
  best.squared_distance = std::numeric_limits<double>::infinity();
  if (nodes_.empty()) return best;
  std::array<int, 64> stack;
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (box_squared_distance(p, node.lo, node.hi) >= best.squared_distance) continue;
    if (node.left < 0) {
      for (int i = node.begin; i < node.end; ++i) {
        const int f = order_[i];
        const Triangle& t = mesh_.triangles[f];
        ClosestPoint c = closest_point_on_triangle(p, mesh_.vertices[t[0]],
                                                   mesh_.vertices[t[1]], mesh_.vertices[t[2]]);
        if (c.squared_distance < best.squared_distance) {
          c.face = f;
          best = c;
        }
      }
      continue;
    }
    // Visit the nearer child first.
    const Node& l = nodes_[node.left];
    const Node& r = nodes_[node.right];
    const double dl = box_squared_distance(p, l.lo, l.hi);
    const double dr = box_squared_distance(p, r.lo, r.hi);
    if (dl < dr) {
      stack[top++] = node.right;
      stack[top++] = node.left;
    } else {
      stack[top++] = node.left;
      stack[top++] = node.right;
    }
  }
  return best;
}

}  // namespace mvps
