#include <cmath>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

#include "mvps/distance.hpp"
#include "mvps/marching_cubes.hpp"
#include "mvps/octree.hpp"
#include "mvps/raycast.hpp"
#include "support.hpp"

namespace mvps {
namespace {

const Cube kUnitBounds{Vec3::Zero(), 2.0};

double sphere_field(const Vec3& p) { return p.norm() - 1.0; }

std::size_t centre_shell_count(int level, double radius, const Cube& bounds) {
  // Voxel centres of the uniform grid whose analytic distance lies in the band.
  const int n = 1 << level;
  const double h = bounds.edge() / n;
  std::size_t count = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int k = 0; k < n; ++k) {
        const Vec3 c = bounds.min() + h * Vec3(i + 0.5, j + 0.5, k + 0.5);
        if (std::abs(c.norm() - radius) < 2.0 * h) ++count;
      }
  return count;
}

double total_leaf_volume(const SdfVolume& v) {
  double sum = 0.0;
  for (const OctreeNode& n : v.nodes()) {
    if (n.is_leaf()) sum += n.edge() * n.edge() * n.edge();
  }
  return sum;
}

TEST(BuildVolume, UniformGridAndBand) {
  const SdfVolume v = build_volume(kUnitBounds, 3, sphere_field);
  EXPECT_EQ(v.leaf_count(), 512u);
  EXPECT_EQ(v.level(), 3);
  EXPECT_DOUBLE_EQ(v.finest_edge(), 0.5);
  for (int id = 0; id < v.voxel_count(); ++id) {
    EXPECT_TRUE(in_narrow_band(v.d()[id], 0.5));
    EXPECT_EQ(v.voxel(id).voxel_id, id);
  }
}

TEST(BuildBandVolume, SameBandAndNeighboursAsUniformGrid) {
  const SdfVolume uniform = build_volume(kUnitBounds, 6, sphere_field);
  const SdfVolume pruned = build_band_volume(kUnitBounds, 6, sphere_field);
  EXPECT_LT(pruned.leaf_count(), uniform.leaf_count() / 4);
  EXPECT_EQ(pruned.level(), 6);
  ASSERT_EQ(pruned.voxel_count(), uniform.voxel_count());
  for (int id = 0; id < pruned.voxel_count(); ++id) {
    const OctreeNode& leaf = pruned.voxel(id);
    const OctreeNode& twin = uniform.node(uniform.locate(leaf.center));
    EXPECT_EQ(leaf.center, twin.center);
    EXPECT_EQ(pruned.d()[id], uniform.d()[twin.voxel_id]);
    for (Axis axis : {Axis::X, Axis::Y, Axis::Z}) {
      for (Direction dir : {Direction::Negative, Direction::Positive}) {
        const int n = pruned.neighbor_node(pruned.voxel_node(id), axis, dir);
        if (n < 0) continue;
        EXPECT_EQ(pruned.node(n).level, 6);
      }
    }
  }
  for (int i = 0; i < static_cast<int>(pruned.nodes().size()); ++i) {
    const OctreeNode& n = pruned.node(i);
    if (n.is_leaf() && n.level < 6) EXPECT_FALSE(n.band);
  }
}

TEST(BuildInitialVolume, SphereBandMatchesAnalyticShell) {
  const TriangleMesh sphere = make_icosphere(6);
  const SdfVolume v = build_initial_volume(sphere, kUnitBounds, 5);
  const std::size_t oracle = centre_shell_count(5, 1.0, kUnitBounds);
  EXPECT_NEAR(static_cast<double>(v.voxel_count()), static_cast<double>(oracle), 0.02 * oracle);
  // Surface-proportional: far below the full grid.
  EXPECT_LT(v.voxel_count(), (1 << 15) / 4);
}

TEST(BuildInitialVolume, LevelZeroIsSingleLeaf) {
  const SdfVolume v = build_initial_volume(make_icosphere(3), kUnitBounds, 0);
  EXPECT_EQ(v.leaf_count(), 1u);
  EXPECT_EQ(v.voxel_count(), 1);
  EXPECT_NEAR(v.d()[0], -1.0, 0.02);
}

TEST(BuildInitialVolume, RejectsBadInput) {
  EXPECT_THROW(build_initial_volume(TriangleMesh{}, kUnitBounds, 4), InputError);
  EXPECT_THROW(build_initial_volume(make_icosphere(2, 3.0), kUnitBounds, 4), InputError);
  EXPECT_THROW(build_initial_volume(make_icosphere(2), kUnitBounds, 13), InputError);
  EXPECT_THROW(SdfVolume(Cube{Vec3::Zero(), 0.0}), InputError);
}

TEST(SubdivideBand, ZeroLeafSplitsIntoBandChildren) {
  const SdfVolume v = build_volume(Cube{Vec3::Zero(), 1.0}, 0, [](const Vec3&) { return 0.0; });
  const SdfVolume s = subdivide_band(v);
  EXPECT_EQ(s.leaf_count(), 8u);
  EXPECT_EQ(s.voxel_count(), 8);
  EXPECT_EQ(s.level(), 1);
}

TEST(SubdivideBand, ChildrenKeepBandOnlyNearSurface) {
  const SdfVolume v = build_volume(Cube{Vec3::Zero(), 2.0}, 2, [](const Vec3& p) { return p.z(); });
  ASSERT_EQ(v.voxel_count(), 64);
  const SdfVolume s = subdivide_band(v);
  EXPECT_EQ(s.leaf_count(), 512u);
  for (const OctreeNode& n : s.nodes()) {
    if (!n.is_leaf()) continue;
    EXPECT_NEAR(n.sdf, n.center.z(), 1e-12);
    EXPECT_EQ(n.band, std::abs(n.center.z()) < 1.0) << n.center.transpose();
  }
}

TEST(SubdivideBand, FarLeafUntouched) {
  const SdfVolume v = build_volume(Cube{Vec3::Zero(), 8.0}, 3, [](const Vec3& p) { return p.z(); });
  const SdfVolume s = subdivide_band(v);
  const int far = s.locate(Vec3(1, 1, 7));
  ASSERT_GE(far, 0);
  EXPECT_EQ(s.node(far).level, 3);
  EXPECT_DOUBLE_EQ(s.node(far).sdf, 7.0);
  EXPECT_EQ(s.node(s.locate(Vec3(1, 1, 0.5))).level, 4);
}

TEST(SubdivideBand, SurfaceLikeGrowth) {
  SdfVolume v = build_volume(kUnitBounds, 4, sphere_field);
  for (int round = 0; round < 3; ++round) {
    SdfVolume next = subdivide_band(v);
    std::vector<double> exact(next.voxel_count());
    for (int i = 0; i < next.voxel_count(); ++i) exact[i] = sphere_field(next.voxel(i).center);
    next.set_d(exact);
    const double ratio = static_cast<double>(next.voxel_count()) / v.voxel_count();
    EXPECT_GE(ratio, 3.0) << "round " << round;
    EXPECT_LE(ratio, 6.0) << "round " << round;
    // Analytic shell count at the new level agrees with the refined band.
    const std::size_t oracle = centre_shell_count(next.level(), 1.0, kUnitBounds);
    EXPECT_NEAR(static_cast<double>(next.voxel_count()), static_cast<double>(oracle),
                0.05 * oracle);
    v = std::move(next);
  }
}

TEST(SubdivideBand, LeavesTileTheBounds) {
  SdfVolume v = build_volume(kUnitBounds, 3, sphere_field);
  for (int i = 0; i < 3; ++i) v = subdivide_band(v);
  EXPECT_NEAR(total_leaf_volume(v), kUnitBounds.volume(), 1e-9 * kUnitBounds.volume());
  for (const OctreeNode& n : v.nodes()) {
    if (n.is_leaf()) continue;
    Vec3 mean = Vec3::Zero();
    for (int c = 0; c < 8; ++c) {
      const OctreeNode& child = v.node(n.first_child + c);
      EXPECT_DOUBLE_EQ(child.half_size, 0.5 * n.half_size);
      EXPECT_DOUBLE_EQ((child.center - n.center).cwiseAbs().maxCoeff(), child.half_size);
      mean += child.center;
    }
    EXPECT_LT((mean / 8.0 - n.center).norm(), 1e-12);
  }
}

TEST(Locate, FindsContainingLeaf) {
  SdfVolume v = subdivide_band(build_volume(kUnitBounds, 3, sphere_field));
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1.99, 1.99);
  for (int i = 0; i < 500; ++i) {
    const Vec3 p(u(rng), u(rng), u(rng));
    const int leaf = v.locate(p);
    ASSERT_GE(leaf, 0);
    const OctreeNode& n = v.node(leaf);
    EXPECT_TRUE(n.is_leaf());
    EXPECT_LE((p - n.center).cwiseAbs().maxCoeff(), n.half_size + 1e-12);
  }
  EXPECT_EQ(v.locate(Vec3(3, 0, 0)), -1);
}

TEST(RefinementComplete, PinholeFootprint) {
  const Camera cam(Mat3::Identity(), Vec3::Zero(), 600.0, Vec2(500, 500), 1000, 1000);
  const std::vector<Camera> cams{cam};
  const auto leaf = [](double edge) {
    return build_volume(Cube{Vec3(0, 0, 100), 0.5 * edge}, 0, [](const Vec3&) { return 0.0; });
  };
  EXPECT_FALSE(refinement_complete(leaf(1.0), std::span<const Camera>(cams)));
  EXPECT_TRUE(refinement_complete(leaf(0.05), std::span<const Camera>(cams)));
  EXPECT_TRUE(refinement_complete(leaf(1.0), std::span<const Camera>()));
  // A view that cannot see the leaf does not block completion.
  const Camera away(Mat3::Identity(), Vec3(0, 0, -200), 600.0, Vec2(500, 500), 1000, 1000);
  const std::vector<Camera> both{cam, away};
  EXPECT_FALSE(refinement_complete(leaf(1.0), std::span<const Camera>(both)));
  const std::vector<Camera> only_away{away};
  EXPECT_TRUE(refinement_complete(leaf(1.0), std::span<const Camera>(only_away)));
}

TEST(Neighbor, SlabInteriorAndBoundary) {
  // Band slab |z| < 2 edges on a uniform level-3 grid (edge 0.5).
  const SdfVolume v = build_volume(kUnitBounds, 3, [](const Vec3& p) { return p.z(); });
  const int centre = v.node(v.locate(Vec3(0.25, 0.25, 0.25))).voxel_id;
  ASSERT_GE(centre, 0);
  const auto up = v.neighbor(centre, Axis::Z, Direction::Positive);
  ASSERT_TRUE(up);
  EXPECT_LT((v.voxel(*up).center - Vec3(0.25, 0.25, 0.75)).norm(), 1e-12);
  const auto right = v.neighbor(centre, Axis::X, Direction::Positive);
  ASSERT_TRUE(right);
  EXPECT_LT((v.voxel(*right).center - Vec3(0.75, 0.25, 0.25)).norm(), 1e-12);

  const int top = v.node(v.locate(Vec3(0.25, 0.25, 0.75))).voxel_id;
  ASSERT_GE(top, 0);
  EXPECT_FALSE(v.neighbor(top, Axis::Z, Direction::Positive));  // z = 1.25 outside the band
  const int edge = v.node(v.locate(Vec3(1.75, 0.25, 0.25))).voxel_id;
  EXPECT_FALSE(v.neighbor(edge, Axis::X, Direction::Positive));  // outside the bounds
}

TEST(Neighbor, SameLevelLookupIsSymmetric) {
  SdfVolume v = subdivide_band(build_volume(kUnitBounds, 3, sphere_field));
  for (int id = 0; id < v.voxel_count(); ++id) {
    for (int a = 0; a < 3; ++a) {
      const auto axis = static_cast<Axis>(a);
      const auto b = v.neighbor(id, axis, Direction::Positive);
      if (!b || v.voxel(*b).level != v.voxel(id).level) continue;
      const auto back = v.neighbor(*b, axis, Direction::Negative);
      ASSERT_TRUE(back);
      EXPECT_EQ(*back, id);
    }
  }
}

// Root split once; octant 0 split again. All leaves band.
SdfVolume two_level_tree() {
  SdfVolume v(Cube{Vec3::Zero(), 2.0});
  v.split(0);
  v.split(1);  // octant 0 of the root, centre (-1,-1,-1)
  for (std::size_t n = 0; n < v.nodes().size(); ++n) {
    if (v.node(static_cast<int>(n)).is_leaf()) {
      v.set_leaf(static_cast<int>(n), v.node(static_cast<int>(n)).center.x(), true);
    }
  }
  v.reassign_voxel_ids();
  return v;
}

TEST(Neighbor, HandBuiltTwoLevelTree) {
  const SdfVolume v = two_level_tree();
  ASSERT_EQ(v.voxel_count(), 15);
  ASSERT_EQ(v.level(), 2);
  // Expected adjacency by direct geometry: the leaf sharing the face.
  const auto expected = [&](int id, int axis, int sign) -> int {
    const OctreeNode& n = v.voxel(id);
    Vec3 probe = n.center;
    probe[axis] += sign * (n.half_size + 1e-9);
    // Lowest-index lateral child when the neighbour is finer.
    for (int a = 0; a < 3; ++a) {
      if (a != axis) probe[a] -= n.half_size - 1e-6;
    }
    const int leaf = v.locate(probe);
    return leaf < 0 ? -1 : v.node(leaf).voxel_id;
  };
  for (int id = 0; id < v.voxel_count(); ++id) {
    for (int a = 0; a < 3; ++a) {
      for (int s : {-1, 1}) {
        const auto got = v.neighbor(id, static_cast<Axis>(a), s > 0 ? Direction::Positive
                                                                      : Direction::Negative);
        const int want = expected(id, a, s);
        EXPECT_EQ(got ? *got : -1, want) << "voxel " << id << " axis " << a << " sign " << s;
      }
    }
  }
  // A fine voxel on the +x face of the refined octant sees the coarse leaf (root octant 1).
  const int fine = v.node(v.locate(Vec3(-0.5, -1.5, -1.5))).voxel_id;
  const auto coarse = v.neighbor(fine, Axis::X, Direction::Positive);
  ASSERT_TRUE(coarse);
  EXPECT_EQ(v.voxel(*coarse).level, 1);
  EXPECT_LT((v.voxel(*coarse).center - Vec3(1, -1, -1)).norm(), 1e-12);
}

TEST(VolumeDump, RoundTripIsExact) {
  test::TempDir dir("dump");
  const SdfVolume v = subdivide_band(build_volume(kUnitBounds, 3, sphere_field));
  write_volume_dump(dir / "v.sdf", v);
  const SdfVolume back = read_volume_dump(dir / "v.sdf");
  ASSERT_EQ(back.leaf_count(), v.leaf_count());
  ASSERT_EQ(back.voxel_count(), v.voxel_count());
  for (int id = 0; id < v.voxel_count(); ++id) {
    EXPECT_EQ(back.d()[id], v.d()[id]);
    EXPECT_EQ(back.voxel(id).center, v.voxel(id).center);
  }
  write_volume_dump(dir / "w.sdf", back);
  std::ifstream a(dir / "v.sdf", std::ios::binary), b(dir / "w.sdf", std::ios::binary);
  const std::string sa((std::istreambuf_iterator<char>(a)), {});
  const std::string sb((std::istreambuf_iterator<char>(b)), {});
  EXPECT_EQ(sa, sb);
  EXPECT_EQ(sa.substr(0, 4), "SDF1");
}

TEST(VolumeDump, BadMagic) {
  test::TempDir dir("dumpbad");
  {
    std::ofstream out(dir / "x.sdf", std::ios::binary);
    out << "NOPE and more";
  }
  EXPECT_THROW(read_volume_dump(dir / "x.sdf"), InputError);
  EXPECT_THROW(read_volume_dump(dir / "missing.sdf"), InputError);
}

class BoxOccluderVolume : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    volume_ = new SdfVolume(
        build_initial_volume(make_box(Vec3::Constant(-0.5), Vec3::Constant(0.5)),
                             Cube{Vec3::Zero(), 4.0}, 6));
  }
  static void TearDownTestSuite() {
    delete volume_;
    volume_ = nullptr;
  }
  static SdfVolume* volume_;
};
SdfVolume* BoxOccluderVolume::volume_ = nullptr;

TEST_F(BoxOccluderVolume, CubeBetweenVoxelAndLightBlocks) {
  EXPECT_EQ(raycast(*volume_, Vec3(0, 0, -2), Vec3(0, 0, 2)), RayResult::Blocked);
  EXPECT_EQ(raycast(*volume_, Vec3(0, 0, 2), Vec3(0, 0, -2)), RayResult::Blocked);
  EXPECT_EQ(raycast(*volume_, Vec3(2, 0, -2), Vec3(2, 0, 2)), RayResult::Clear);
}

TEST(Raycast, EmptySceneIsClear) {
  const SdfVolume v = build_volume(Cube{Vec3::Zero(), 4.0}, 4, [](const Vec3&) { return 5.0; });
  EXPECT_EQ(raycast(v, Vec3(0, 0, -2), Vec3(0, 0, 2)), RayResult::Clear);
  const TriangleBvh none;
  EXPECT_EQ(raycast(none, Vec3(0, 0, -2), Vec3(0, 0, 2), 0.1), RayResult::Clear);
}

TEST(Raycast, MeshVersionRespectsEpsilon) {
  const TriangleBvh box(make_box(Vec3::Constant(-0.5), Vec3::Constant(0.5)));
  EXPECT_EQ(raycast(box, Vec3(0, 0, -2), Vec3(0, 0, 2), 0.01), RayResult::Blocked);
  // Start on the face itself: excluded by the epsilon.
  EXPECT_EQ(raycast(box, Vec3(0, 0, 0.5), Vec3(0, 0, 3), 0.01), RayResult::Clear);
  EXPECT_EQ(raycast(box, Vec3(0, 0, 0.5), Vec3(0, 0, -3), 0.01), RayResult::Blocked);
}

TEST(Raycast, SignFlipAwayFromZeroSetIsNotASurface) {
  // Signed distance to the half-plane z = 0, x < 0: the sign still flips
  // across z = 0 for x > 0, where the distance stays large.
  const SdfVolume v = build_volume(Cube{Vec3::Zero(), 4.0}, 5, [](const Vec3& p) {
    if (p.x() < 0.0) return p.z();
    return std::copysign(std::hypot(p.x(), p.z()), p.z());
  });
  EXPECT_EQ(raycast(v, Vec3(-2.5, 0.3, -2), Vec3(-2.5, 0.3, 2)), RayResult::Blocked);
  EXPECT_EQ(raycast(v, Vec3(2.5, 0.3, -2), Vec3(2.5, 0.3, 2)), RayResult::Clear);
}

// Chord length of the segment inside the mesh, by dense sampling of the
// exact signed distance.
double inside_length(const SignedDistance& sdf, const Vec3& a, const Vec3& b, double step) {
  const double len = (b - a).norm();
  const int n = std::max(2, static_cast<int>(len / step));
  int inside = 0;
  for (int i = 0; i < n; ++i) {
    if (sdf(a + (b - a) * ((i + 0.5) / n)) < 0.0) ++inside;
  }
  return len * inside / n;
}

TEST(Raycast, AgreesWithMeshOracle) {
  TriangleMesh scene = make_icosphere(5, 6.0, Vec3(-4, 0, 0));
  append_mesh(scene, make_box(Vec3(3, -3, -3), Vec3(9, 3, 3)));
  const Cube bounds{Vec3::Zero(), 16.0};
  const SdfVolume volume = build_initial_volume(scene, bounds, 7);
  const SignedDistance sdf(scene);
  const TriangleBvh bvh(scene);
  const double h = volume.finest_edge();

  std::mt19937_64 rng(17);
  std::uniform_int_distribution<int> pick(0, volume.voxel_count() - 1);
  int clear = 0, clear_agree = 0, deep = 0, deep_agree = 0;
  for (int i = 0; i < 1000; ++i) {
    // Voxel centre just outside the surface to a light on a 14-unit sphere.
    Vec3 from;
    do {
      from = volume.voxel(pick(rng)).center;
    } while (sdf(from) <= 0.0);
    const Vec3 to = 14.0 * test::random_unit(rng);
    const bool mesh_blocked = raycast(bvh, from, to, 1.5 * h) == RayResult::Blocked;
    const bool volume_blocked = raycast(volume, from, to) == RayResult::Blocked;
    EXPECT_EQ(volume_blocked, raycast(volume, to, from) == RayResult::Blocked);
    if (!mesh_blocked) {
      ++clear;
      clear_agree += volume_blocked ? 0 : 1;
    } else if (inside_length(sdf, from, to, 0.1 * h) > 2.0 * h) {
      ++deep;
      deep_agree += volume_blocked ? 1 : 0;
    }
  }
  ASSERT_GT(clear, 100);
  ASSERT_GT(deep, 100);
  EXPECT_GE(clear_agree, 0.99 * clear);
  EXPECT_EQ(deep_agree, deep);
}

TEST(MarchingCubes, SingleCellCorner) {
  std::vector<double> values(8, 1.0);
  values[0] = -1.0;
  const TriangleMesh m = marching_cubes_grid(values, {2, 2, 2}, Vec3::Zero(), 1.0);
  ASSERT_EQ(m.triangles.size(), 1u);
  for (const Vec3& p : m.vertices) EXPECT_NEAR(p.sum(), 0.5, 1e-12);
  // Faces away from the inside corner.
  EXPECT_GT(face_normal(m, 0).dot(Vec3(1, 1, 1)), 0.0);
}

TEST(ExtractMesh, SphereVerticesWithinHalfEdge) {
  const SdfVolume v = build_volume(kUnitBounds, 6, sphere_field);
  const TriangleMesh m = extract_mesh(v);
  ASSERT_FALSE(m.empty());
  const double h = v.finest_edge();
  double sum = 0.0;
  for (const Vec3& p : m.vertices) {
    EXPECT_NEAR(p.norm(), 1.0, 0.5 * h);
    sum += (p.norm() - 1.0) * (p.norm() - 1.0);
  }
  EXPECT_LT(std::sqrt(sum / m.vertices.size()), 0.5 * h);
  EXPECT_GT(signed_volume(m), 0.0);
  EXPECT_NO_THROW(check_orientation(m));
}

TEST(ExtractMesh, ConstantPositiveIsEmpty) {
  const SdfVolume v = build_volume(kUnitBounds, 4, [](const Vec3&) { return 0.01; });
  EXPECT_TRUE(extract_mesh(v).empty());
}

TEST(ExtractMesh, OffsetPlaneIsExact) {
  const double h = kUnitBounds.edge() / 32.0;
  const SdfVolume v = build_volume(kUnitBounds, 5, [h](const Vec3& p) { return p.z() - 0.5 * h; });
  const TriangleMesh m = extract_mesh(v);
  ASSERT_FALSE(m.empty());
  for (const Vec3& p : m.vertices) EXPECT_NEAR(p.z(), 0.5 * h, 1e-6);
}

TEST(ExtractMesh, SdtRoundTripOnMultiLevelVolume) {
  const TriangleMesh sphere = make_icosphere(6);
  const SignedDistance sdf(sphere);
  SdfVolume v = build_initial_volume(sphere, kUnitBounds, 4);
  for (int i = 0; i < 2; ++i) {
    v = subdivide_band(v);
    std::vector<double> exact(v.voxel_count());
    for (int id = 0; id < v.voxel_count(); ++id) exact[id] = sdf(v.voxel(id).center);
    v.set_d(exact);
  }
  const TriangleMesh m = extract_mesh(v);
  const double h = v.finest_edge();
  double sum = 0.0;
  for (const Vec3& p : m.vertices) sum += (p.norm() - 1.0) * (p.norm() - 1.0);
  EXPECT_LT(std::sqrt(sum / m.vertices.size()), 0.5 * h);
  // Crack-free: a single closed, consistently oriented surface.
  EXPECT_NO_THROW(check_orientation(m));
  EXPECT_EQ(static_cast<long>(m.vertices.size()) - static_cast<long>(m.triangles.size()) / 2, 2);
}

}  // namespace
}  // namespace mvps
