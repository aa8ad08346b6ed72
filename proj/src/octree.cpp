#include "mvps/octree.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "mvps/distance.hpp"

namespace mvps {

SdfVolume::SdfVolume(const Cube& bounds) : bounds_(bounds) {
  if (!(bounds.half_size > 0.0) || !bounds.center.allFinite()) {
    throw InputError("volume bounds must be a finite cube with positive size");
  }
  OctreeNode root;
  root.center = bounds.center;
  root.half_size = bounds.half_size;
  nodes_.push_back(root);
}

int SdfVolume::level() const {
  if (level_cache_ < 0) level_cache_ = compute_level();
  return level_cache_;
}

int SdfVolume::compute_level() const {
  int deepest = -1;
  for (int id : voxel_nodes_) deepest = std::max(deepest, nodes_[id].level);
  if (deepest >= 0) return deepest;
  for (const OctreeNode& n : nodes_) {
    if (n.is_leaf()) deepest = std::max(deepest, n.level);
  }
  return deepest;
}

double SdfVolume::finest_edge() const {
  return bounds_.edge() / static_cast<double>(std::uint64_t{1} << level());
}

std::size_t SdfVolume::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const OctreeNode& n) { return n.is_leaf(); }));
}

void SdfVolume::set_d(std::vector<double> d) {
  if (d.size() != voxel_nodes_.size()) throw Error("set_d: size does not match band");
  d_ = std::move(d);
  for (std::size_t i = 0; i < d_.size(); ++i) nodes_[voxel_nodes_[i]].sdf = d_[i];
  refresh_gradients();
}

int SdfVolume::locate(const Vec3& p) const {
  if (!bounds_.contains(p)) return -1;
  int index = 0;
  while (!nodes_[index].is_leaf()) {
    const OctreeNode& n = nodes_[index];
    const int octant = (p.x() > n.center.x() ? 1 : 0) | (p.y() > n.center.y() ? 2 : 0) |
                       (p.z() > n.center.z() ? 4 : 0);
    index = n.first_child + octant;
  }
  return index;
}

double SdfVolume::interpolate(const Vec3& p) const {
  const int leaf = locate(p);
  if (leaf < 0) return std::numeric_limits<double>::infinity();
  const OctreeNode& n = nodes_[leaf];
  if (!n.band) return n.sdf;
  return n.sdf + gradients_[n.voxel_id].dot(p - n.center);
}

int SdfVolume::neighbor_node(int node, Axis axis, Direction direction) const {
  const int bit = 1 << static_cast<int>(axis);
  const bool positive = direction == Direction::Positive;
  // Ascend until the node sits on the side of its parent facing away from
  // the requested direction; its mirrored sibling is then adjacent.
  std::vector<int> path;
  int current = node;
  int sibling = -1;
  while (nodes_[current].parent >= 0) {
    const OctreeNode& parent = nodes_[nodes_[current].parent];
    const int octant = current - parent.first_child;
    const bool on_positive_side = (octant & bit) != 0;
    if (on_positive_side != positive) {
      sibling = parent.first_child + (octant ^ bit);
      break;
    }
    path.push_back(octant);
    current = nodes_[current].parent;
  }
  if (sibling < 0) return -1;
  // Descend along the mirrored path, stopping early at a coarser leaf.
  int result = sibling;
  for (auto it = path.rbegin(); it != path.rend(); ++it) {
    if (nodes_[result].is_leaf()) break;
    result = nodes_[result].first_child + (*it ^ bit);
  }
  return result;
}

std::optional<int> SdfVolume::neighbor(int voxel_id, Axis axis, Direction direction) const {
  int n = neighbor_node(voxel_nodes_[voxel_id], axis, direction);
  if (n < 0) return std::nullopt;
  // Finer neighbourhood: walk down the children touching the shared face.
  const int bit = 1 << static_cast<int>(axis);
  const int facing = direction == Direction::Positive ? 0 : bit;
  while (!nodes_[n].is_leaf()) n = nodes_[n].first_child + facing;
  if (!nodes_[n].band) return std::nullopt;
  return nodes_[n].voxel_id;
}

void SdfVolume::split(int node) {
  if (!nodes_[node].is_leaf()) throw Error("split: node is not a leaf");
  const int first = static_cast<int>(nodes_.size());
  const OctreeNode parent = nodes_[node];
  const double h = 0.5 * parent.half_size;
  for (int octant = 0; octant < 8; ++octant) {
    OctreeNode child;
    child.center = parent.center + Vec3((octant & 1) ? h : -h, (octant & 2) ? h : -h,
                                        (octant & 4) ? h : -h);
    child.half_size = h;
    child.level = parent.level + 1;
    child.parent = node;
    nodes_.push_back(child);
  }
  OctreeNode& p = nodes_[node];
  p.first_child = first;
  p.band = false;
  p.voxel_id = -1;
  level_cache_ = -1;
}

void SdfVolume::set_leaf(int node, double sdf) {
  set_leaf(node, sdf, in_narrow_band(sdf, nodes_[node].edge()));
}

void SdfVolume::set_leaf(int node, double sdf, bool band) {
  nodes_[node].sdf = sdf;
  nodes_[node].band = band;
  level_cache_ = -1;
}

void SdfVolume::reassign_voxel_ids() {
  voxel_nodes_.clear();
  d_.clear();
  for (int i = 0; i < static_cast<int>(nodes_.size()); ++i) {
    OctreeNode& n = nodes_[i];
    if (n.is_leaf() && n.band) {
      n.voxel_id = static_cast<int>(voxel_nodes_.size());
      voxel_nodes_.push_back(i);
      d_.push_back(n.sdf);
    } else {
      n.voxel_id = -1;
    }
  }
  level_cache_ = -1;
  refresh_gradients();
}

void SdfVolume::refresh_gradients() {
  gradients_.assign(voxel_nodes_.size(), Vec3::Zero());
  for (int v = 0; v < voxel_count(); ++v) {
    const OctreeNode& n = nodes_[voxel_nodes_[v]];
    for (int a = 0; a < 3; ++a) {
      const auto axis = static_cast<Axis>(a);
      const auto fwd = neighbor(v, axis, Direction::Positive);
      const auto bwd = neighbor(v, axis, Direction::Negative);
      const double x0 = n.center[a];
      if (fwd && bwd) {
        const OctreeNode& f = voxel(*fwd);
        const OctreeNode& b = voxel(*bwd);
        gradients_[v][a] = (f.sdf - b.sdf) / (f.center[a] - b.center[a]);
      } else if (fwd) {
        const OctreeNode& f = voxel(*fwd);
        gradients_[v][a] = (f.sdf - n.sdf) / (f.center[a] - x0);
      } else if (bwd) {
        const OctreeNode& b = voxel(*bwd);
        gradients_[v][a] = (n.sdf - b.sdf) / (x0 - b.center[a]);
      }
    }
  }
}

SdfVolume build_volume(const Cube& bounds, int level,
                       const std::function<double(const Vec3&)>& field) {
  if (level < 0 || level > 12) throw InputError("octree level must be in [0, 12]");
  SdfVolume volume(bounds);
  std::vector<int> frontier{0};
  for (int l = 0; l < level; ++l) {
    std::vector<int> next;
    next.reserve(frontier.size() * 8);
    for (int n : frontier) {
      volume.split(n);
      const int first = volume.node(n).first_child;
      for (int c = 0; c < 8; ++c) next.push_back(first + c);
    }
    frontier = std::move(next);
  }
  for (int n : frontier) volume.set_leaf(n, field(volume.node(n).center));
  volume.reassign_voxel_ids();
  return volume;
}

SdfVolume build_band_volume(const Cube& bounds, int level,
                            const std::function<double(const Vec3&)>& field) {
  if (level < 0 || level > 12) throw InputError("octree level must be in [0, 12]");
  SdfVolume volume(bounds);
  const double h = bounds.edge() / static_cast<double>(1 << level);
  std::vector<int> frontier{0};
  for (int l = 0; l < level; ++l) {
    std::vector<int> next;
    for (int n : frontier) {
      const OctreeNode& node = volume.node(n);
      const double d = field(node.center);
      // Leaves below this node have |d| > 4h: outside the band and its neighbours.
      if (std::abs(d) >= 0.5 * std::sqrt(3.0) * node.edge() + 4.0 * h) {
        volume.set_leaf(n, d, false);
        continue;
      }
      volume.split(n);
      const int first = volume.node(n).first_child;
      for (int c = 0; c < 8; ++c) next.push_back(first + c);
    }
    frontier = std::move(next);
  }
  for (int n : frontier) volume.set_leaf(n, field(volume.node(n).center));
  volume.reassign_voxel_ids();
  return volume;
}

SdfVolume build_initial_volume(const TriangleMesh& initial_mesh, const Cube& bounds,
                               int base_level) {
  if (initial_mesh.empty()) throw InputError("initial mesh is empty");
  for (const Vec3& v : initial_mesh.vertices) {
    if (!bounds.contains(v)) throw InputError("initial mesh extends outside the volume bounds");
  }
  const SignedDistance sdf(initial_mesh);
  SdfVolume volume = build_band_volume(bounds, base_level, [&](const Vec3& p) { return sdf(p); });
  if (volume.voxel_count() == 0) {
    throw InputError("narrow band is empty at base level " + std::to_string(base_level) +
                     "; use a finer base_level");
  }
  return volume;
}

SdfVolume subdivide_band(const SdfVolume& volume) {
  SdfVolume out = volume;
  for (int v = 0; v < volume.voxel_count(); ++v) {
    const int index = volume.voxel_node(v);
    const OctreeNode& parent = volume.node(index);
    const double d = volume.d()[v];
    if (std::abs(d) >= 2.0 * parent.edge()) continue;
    const Vec3 g = volume.voxel_gradient(v);
    out.split(index);
    const int first = out.node(index).first_child;
    for (int c = 0; c < 8; ++c) {
      const OctreeNode& child = out.node(first + c);
      out.set_leaf(first + c, d + g.dot(child.center - parent.center));
    }
  }
  out.reassign_voxel_ids();
  return out;
}

bool refinement_complete(const SdfVolume& volume, std::span<const Camera> cameras) {
  for (int v = 0; v < volume.voxel_count(); ++v) {
    const OctreeNode& n = volume.voxel(v);
    for (const Camera& camera : cameras) {
      const Projection p = camera.project(n.center);
      if (!p.in_frustum) continue;
      if (n.edge() * camera.focal_length() / p.depth >= 1.0) return false;
    }
  }
  return true;
}

bool refinement_complete(const SdfVolume& volume, std::span<const PsView> views) {
  std::vector<Camera> cameras;
  cameras.reserve(views.size());
  for (const PsView& v : views) cameras.push_back(v.camera);
  return refinement_complete(volume, std::span<const Camera>(cameras));
}

namespace {

static_assert(std::endian::native == std::endian::little,
              "volume dump I/O assumes a little-endian host");

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T get(std::istream& in) {
  T v;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) {
    throw InputError("volume dump: unexpected end of file");
  }
  return v;
}

}  // namespace

void write_volume_dump(const std::filesystem::path& path, const SdfVolume& volume) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write volume dump: " + path.string());
  out.write("SDF1", 4);
  const Cube& b = volume.bounds();
  put(out, b.center.x());
  put(out, b.center.y());
  put(out, b.center.z());
  put(out, b.half_size);
  put(out, static_cast<std::uint32_t>(std::max(volume.level(), 0)));
  put(out, static_cast<std::uint64_t>(volume.leaf_count()));
  for (const OctreeNode& n : volume.nodes()) {
    if (!n.is_leaf()) continue;
    put(out, n.center.x());
    put(out, n.center.y());
    put(out, n.center.z());
    put(out, n.half_size);
    put(out, n.sdf);
    put(out, static_cast<std::uint8_t>(n.band ? 1 : 0));
  }
}

SdfVolume read_volume_dump(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open volume dump: " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "SDF1", 4) != 0) {
    throw InputError("volume dump: bad magic in " + path.string());
  }
  Cube bounds;
  bounds.center.x() = get<double>(in);
  bounds.center.y() = get<double>(in);
  bounds.center.z() = get<double>(in);
  bounds.half_size = get<double>(in);
  get<std::uint32_t>(in);
  const auto leaves = get<std::uint64_t>(in);
  SdfVolume volume(bounds);
  for (std::uint64_t i = 0; i < leaves; ++i) {
    Vec3 c;
    c.x() = get<double>(in);
    c.y() = get<double>(in);
    c.z() = get<double>(in);
    const double half = get<double>(in);
    const double sdf = get<double>(in);
    const bool band = get<std::uint8_t>(in) != 0;
    int index = 0;
    while (volume.node(index).half_size > 1.5 * half) {
      if (volume.node(index).is_leaf()) volume.split(index);
      const OctreeNode& n = volume.node(index);
      const int octant = (c.x() > n.center.x() ? 1 : 0) | (c.y() > n.center.y() ? 2 : 0) |
                         (c.z() > n.center.z() ? 4 : 0);
      index = n.first_child + octant;
    }
    volume.set_leaf(index, sdf, band);
  }
  volume.reassign_voxel_ids();
  return volume;
}

}  // namespace mvps
