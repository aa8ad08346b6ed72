#pragma once

#include "mvps/bvh.hpp"
#include "mvps/octree.hpp"

namespace mvps {

enum class RayResult { Clear, Blocked };

/// Sign-change test along the open segment (origin + eps, target - eps) with
/// eps = 1.5 finest voxel edges. Band leaves are sampled every half finest
/// edge; other leaves are crossed in one step since the band encloses every
/// zero crossing. Symmetric in its endpoints.
RayResult raycast(const SdfVolume& volume, const Vec3& origin, const Vec3& target);

/// Exact segment-triangle test over (origin + epsilon, target - epsilon).
RayResult raycast(const TriangleBvh& mesh, const Vec3& origin, const Vec3& target,
                  double epsilon);

/// Current surface estimate used for shadow and occlusion tests.
class Occluder {
 public:
  virtual ~Occluder() = default;
  virtual bool blocked(const Vec3& from, const Vec3& to) const = 0;
};

class VolumeOccluder final : public Occluder {
 public:
  explicit VolumeOccluder(const SdfVolume& volume) : volume_(volume) {}
  bool blocked(const Vec3& from, const Vec3& to) const override {
    return raycast(volume_, from, to) == RayResult::Blocked;
  }

 private:
  const SdfVolume& volume_;
};

class MeshOccluder final : public Occluder {
 public:
  MeshOccluder(const TriangleBvh& mesh, double epsilon) : mesh_(mesh), epsilon_(epsilon) {}
  bool blocked(const Vec3& from, const Vec3& to) const override {
    return raycast(mesh_, from, to, epsilon_) == RayResult::Blocked;
  }

 private:
  const TriangleBvh& mesh_;
  double epsilon_;
};

/// Never blocks; for unoccluded reference computations.
class NoOccluder final : public Occluder {
 public:
  bool blocked(const Vec3&, const Vec3&) const override { return false; }
};

}  // namespace mvps
