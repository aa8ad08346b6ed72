#include <cmath>
#include <random>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "mvps/assembly.hpp"
#include "mvps/distance.hpp"
#include "mvps/octree.hpp"
#include "mvps/solver.hpp"
#include "mvps/synth.hpp"
#include "support.hpp"

namespace mvps {
namespace {

using Dense = Eigen::MatrixXd;
using DenseVec = Eigen::VectorXd;

double sphere_field(const Vec3& p) { return p.norm() - 1.0; }

Dense dense_gradient(const GradientOperator& g) {
  Dense m = Dense::Zero(static_cast<Eigen::Index>(g.row_count()), g.voxels);
  for (std::size_t r = 0; r < g.row_count(); ++r) {
    const GradientRow& row = g.rows[r];
    if (row.kind == DifferenceKind::Zero) continue;
    m(static_cast<Eigen::Index>(r), row.hi) += row.inv_spacing;
    m(static_cast<Eigen::Index>(r), row.lo) -= row.inv_spacing;
  }
  return m;
}

struct DenseSystem {
  Dense a;
  DenseVec rhs;
};

// Normal equations assembled from dense blocks, independently of NormalEquations.
DenseSystem dense_normal_equations(const GlobalSystem& s, const GradientOperator& g) {
  const Dense gd = dense_gradient(g);
  const auto rows = static_cast<Eigen::Index>(g.row_count());
  Dense w = Dense::Zero(rows, rows);
  DenseVec q(rows);
  for (int v = 0; v < g.voxels; ++v) {
    for (int st = 0; st < g.stencils; ++st) {
      const Eigen::Index r = (static_cast<Eigen::Index>(v) * g.stencils + st) * 3;
      w.block<3, 3>(r, r) = s.b_prime[v];
      q.segment<3>(r) = s.q[v];
    }
  }
  const Dense wg = w * gd;
  const DenseVec d0 = Eigen::Map<const DenseVec>(s.prior.data(), s.size());
  return {wg.transpose() * wg + s.lambda * Dense::Identity(g.voxels, g.voxels),
          wg.transpose() * q + s.lambda * d0};
}

Mat3 random_b_prime(std::mt19937_64& rng, const Vec3& normal, double scale) {
  // Rank-corrected shape: identity along the normal, larger across it.
  std::uniform_real_distribution<double> u(0.5, 1.5);
  const Vec3 t1 = normal.unitOrthogonal();
  const Vec3 t2 = normal.cross(t1);
  return Mat3::Identity() + scale * u(rng) * t1 * t1.transpose() +
         scale * u(rng) * t2 * t2.transpose();
}

GlobalSystem analytic_system(const SdfVolume& volume, double scale, std::uint64_t seed,
                             double prior_scale = 1.0) {
  std::mt19937_64 rng(seed);
  GlobalSystem s;
  for (int v = 0; v < volume.voxel_count(); ++v) {
    const Vec3 c = volume.voxel(v).center;
    const Vec3 n = c.normalized();
    s.b_prime.push_back(random_b_prime(rng, n, scale));
    s.q.push_back(n);
    s.prior.push_back(prior_scale * sphere_field(c));
  }
  return s;
}

double relative_error(std::span<const double> x, const DenseVec& y) {
  const DenseVec xv = Eigen::Map<const DenseVec>(x.data(), static_cast<Eigen::Index>(x.size()));
  return (xv - y).norm() / y.norm();
}

SdfVolume three_voxel_line() {
  // Edge 1; the voxels at x = -1.5, -0.5, 0.5 (y = z = 0.5) hold 0, 1, 2 and
  // are forced into the band.
  SdfVolume v = build_volume(Cube{Vec3::Zero(), 2.0}, 2, [](const Vec3&) { return 100.0; });
  for (double x : {-1.5, -0.5, 0.5}) v.set_leaf(v.locate(Vec3(x, 0.5, 0.5)), x + 1.5, true);
  v.reassign_voxel_ids();
  return v;
}

TEST(Gradient, LinearFieldOnThreeVoxelLine) {
  const SdfVolume v = three_voxel_line();
  ASSERT_EQ(v.voxel_count(), 3);
  const GradientOperator g = build_gradient(v, GradientScheme::Forward);
  ASSERT_EQ(g.row_count(), 9u);
  EXPECT_EQ(g.row(0, 0, 0).kind, DifferenceKind::Forward);
  EXPECT_EQ(g.row(1, 0, 0).kind, DifferenceKind::Forward);
  EXPECT_EQ(g.row(2, 0, 0).kind, DifferenceKind::Backward);
  std::vector<double> out(g.row_count());
  g.apply(v.d(), out);
  for (int id = 0; id < 3; ++id) {
    EXPECT_DOUBLE_EQ(out[id * 3 + 0], 1.0);
    EXPECT_EQ(out[id * 3 + 1], 0.0);
    EXPECT_EQ(out[id * 3 + 2], 0.0);
  }
  EXPECT_EQ(g.zero_rows(), 6u);

  const GradientOperator fb = build_gradient(v);
  ASSERT_EQ(fb.stencils, 2);
  EXPECT_EQ(fb.row(0, 1, 0).kind, DifferenceKind::Forward);
  EXPECT_EQ(fb.row(1, 1, 0).kind, DifferenceKind::Backward);
  EXPECT_EQ(fb.row(2, 1, 0).kind, DifferenceKind::Backward);
}

TEST(Gradient, ConstantFieldHasZeroGradient) {
  SdfVolume v = build_volume(Cube{Vec3::Zero(), 2.0}, 4, sphere_field);
  std::vector<double> constant(v.voxel_count(), 0.37);
  const GradientOperator g = build_gradient(v);
  std::vector<double> out(g.row_count(), 1.0);
  g.apply(constant, out);
  for (double x : out) EXPECT_EQ(x, 0.0);
}

TEST(Gradient, LevelTransitionUsesCentreSpacing) {
  SdfVolume v(Cube{Vec3::Zero(), 2.0});
  v.split(0);
  v.split(1);
  for (int n = 0; n < static_cast<int>(v.nodes().size()); ++n) {
    const OctreeNode& node = v.node(n);
    if (node.is_leaf()) v.set_leaf(n, node.center.x() * node.center.x() + node.center.y(), true);
  }
  v.reassign_voxel_ids();
  const GradientOperator g = build_gradient(v);
  const int fine = v.node(v.locate(Vec3(-0.5, -1.5, -1.5))).voxel_id;
  const GradientRow& row = g.row(fine, 0, 0);
  ASSERT_EQ(row.kind, DifferenceKind::Forward);
  const OctreeNode& coarse = v.voxel(row.hi);
  EXPECT_EQ(coarse.level, 1);
  EXPECT_DOUBLE_EQ(coarse.center.x() - v.voxel(fine).center.x(), 1.5);
  EXPECT_DOUBLE_EQ(row.inv_spacing, 1.0 / 1.5);
  const Vec3 grad = g.gradient(v.d(), fine);
  EXPECT_DOUBLE_EQ(grad.x(), (v.d()[row.hi] - v.d()[fine]) / 1.5);
}

TEST(Gradient, TransposeIsAdjoint) {
  const SdfVolume v = subdivide_band(build_volume(Cube{Vec3::Zero(), 2.0}, 4, sphere_field));
  const GradientOperator g = build_gradient(v);
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> d(g.voxels), y(g.row_count()), gd(g.row_count()), gty(g.voxels);
  for (double& x : d) x = n(rng);
  for (double& x : y) x = n(rng);
  g.apply(d, gd);
  g.apply_transpose(y, gty);
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) lhs += gd[i] * y[i];
  for (std::size_t i = 0; i < d.size(); ++i) rhs += d[i] * gty[i];
  EXPECT_NEAR(lhs, rhs, 1e-9 * std::abs(lhs));

  const Dense gm = dense_gradient(g);
  const DenseVec expected = gm * Eigen::Map<const DenseVec>(d.data(), g.voxels);
  for (std::size_t i = 0; i < gd.size(); ++i) EXPECT_NEAR(gd[i], expected[i], 1e-12);
}

TEST(Gradient, EveryRowHasAtMostTwoNonzeros) {
  const SdfVolume v = subdivide_band(build_volume(Cube{Vec3::Zero(), 2.0}, 4, sphere_field));
  const GradientOperator g = build_gradient(v);
  const Dense gm = dense_gradient(g);
  for (Eigen::Index r = 0; r < gm.rows(); ++r) {
    EXPECT_LE((gm.row(r).array() != 0.0).count(), 2);
  }
}

TEST(NormalEquations, MatchDenseAssembly) {
  const SdfVolume v = build_volume(Cube{Vec3::Zero(), 2.0}, 3, sphere_field);
  const GradientOperator g = build_gradient(v);
  const GlobalSystem s = analytic_system(v, 50.0, 1);
  const NormalEquations ne(s, g);
  const DenseSystem dense = dense_normal_equations(s, g);
  for (int i = 0; i < ne.size(); ++i) {
    EXPECT_NEAR(ne.rhs()[i], dense.rhs[i], 1e-10 * dense.rhs.norm());
    EXPECT_NEAR(ne.diagonal()[i], dense.a(i, i), 1e-10 * dense.a(i, i));
  }
  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0.0, 1.0);
  std::vector<double> x(ne.size()), ax(ne.size());
  for (double& e : x) e = n(rng);
  ne.apply(x, ax);
  const DenseVec expected = dense.a * Eigen::Map<const DenseVec>(x.data(), ne.size());
  for (int i = 0; i < ne.size(); ++i) EXPECT_NEAR(ax[i], expected[i], 1e-9 * expected.norm());

  // Symmetric positive definite for lambda > 0.
  EXPECT_LT((dense.a - dense.a.transpose()).norm(), 1e-9 * dense.a.norm());
  const DenseVec ev = Eigen::SelfAdjointEigenSolver<Dense>(dense.a).eigenvalues();
  EXPECT_GE(ev.minCoeff(), s.lambda * (1.0 - 1e-9));
}

class SmallSystem : public ::testing::TestWithParam<GradientScheme> {};

TEST_P(SmallSystem, ConjugateGradientsMatchDenseSolve) {
  const SdfVolume v = build_volume(Cube{Vec3::Zero(), 2.0}, 3, sphere_field);
  ASSERT_LE(v.voxel_count(), 500);
  ASSERT_GE(v.voxel_count(), 100);
  const GradientOperator g = build_gradient(v, GetParam());
  GlobalSystem s = analytic_system(v, 2.0, 4, 1.3);
  const DenseSystem dense = dense_normal_equations(s, g);
  const DenseVec exact = dense.a.ldlt().solve(dense.rhs);

  for (Preconditioner pc : {Preconditioner::Jacobi, Preconditioner::None}) {
    SolveOptions options;
    options.tolerance = 1e-12;
    options.max_iterations = 5000;
    options.preconditioner = pc;
    const SolveResult r = solve(s, g, options);
    EXPECT_TRUE(r.report.converged);
    EXPECT_LT(relative_error(r.d, exact), 1e-8);
  }
  // Default tolerance reaches 1e-6 well inside the iteration cap.
  const SolveResult r = solve(s, g);
  EXPECT_TRUE(r.report.converged);
  EXPECT_LT(r.report.relative_residual, 1e-6);
  EXPECT_LT(r.report.iterations, kDefaultCgMaxIterations);
}

INSTANTIATE_TEST_SUITE_P(Schemes, SmallSystem,
                         ::testing::Values(GradientScheme::Forward,
                                           GradientScheme::ForwardBackward));

TEST(Solve, EnergyNormOfErrorDecreases) {
  const SdfVolume v = build_volume(Cube{Vec3::Zero(), 2.0}, 3, sphere_field);
  const GradientOperator g = build_gradient(v);
  const GlobalSystem s = analytic_system(v, 200.0, 5, 0.7);
  const DenseSystem dense = dense_normal_equations(s, g);
  const DenseVec exact = dense.a.ldlt().solve(dense.rhs);
  std::vector<double> energies;
  SolveOptions options;
  options.tolerance = 1e-10;
  options.observer = [&](int, std::span<const double> x) {
    const DenseVec e =
        Eigen::Map<const DenseVec>(x.data(), static_cast<Eigen::Index>(x.size())) - exact;
    energies.push_back(e.dot(dense.a * e));
  };
  solve(s, g, options);
  ASSERT_GT(energies.size(), 5u);
  for (std::size_t i = 1; i < energies.size(); ++i) {
    EXPECT_LE(energies[i], energies[i - 1] + 1e-12 * energies[0]) << "iteration " << i + 1;
  }
}

TEST(Solve, PriorDominatedLimit) {
  const SdfVolume v = build_volume(Cube{Vec3::Zero(), 2.0}, 4, sphere_field);
  const GradientOperator g = build_gradient(v);
  GlobalSystem s = analytic_system(v, 0.0, 1);
  for (Mat3& b : s.b_prime) b = Mat3::Identity();
  s.lambda = 1e8;
  std::vector<double> start(s.size(), 0.0);
  SolveOptions options;
  options.tolerance = 1e-12;
  const SolveResult r = solve(s, g, options, start);
  for (int i = 0; i < s.size(); ++i) EXPECT_NEAR(r.d[i], s.prior[i], 1e-6);
}

TEST(Solve, StableUnderRightHandSidePerturbation) {
  const SdfVolume v = build_volume(Cube{Vec3::Zero(), 2.0}, 4, sphere_field);
  const GradientOperator g = build_gradient(v);
  const GlobalSystem s = analytic_system(v, 100.0, 2);
  SolveOptions options;
  options.tolerance = 1e-12;
  const SolveResult base = solve(s, g, options);
  std::mt19937_64 rng(6);
  std::normal_distribution<double> n(0.0, 0.05);
  GlobalSystem p = s;
  double delta = 0.0;
  for (Vec3& q : p.q) {
    const Vec3 d(n(rng), n(rng), n(rng));
    q += d;
    delta += d.squaredNorm();
  }
  const SolveResult moved = solve(p, g, options);
  double change = 0.0;
  for (int i = 0; i < s.size(); ++i) change += std::pow(moved.d[i] - base.d[i], 2);
  EXPECT_LE(std::sqrt(change), std::sqrt(delta) / s.lambda);
}

TEST(Solve, ExactNormalsGiveEikonalSolution) {
  // h / r = 1/128; one-sided rows at the band boundary carry an O(h / r)
  // curvature error, so coarser grids miss the 1e-2 band.
  const SdfVolume v = build_volume(Cube{Vec3::Zero(), 2.0}, 8, sphere_field);
  const GradientOperator g = build_gradient(v);
  // Prior with the wrong slope; unit tangential eigenvalues before the
  // identity shift.
  const GlobalSystem s = analytic_system(v, 1.0, 3, 0.8);
  const SolveResult r = solve(s, g);
  ASSERT_TRUE(r.report.converged);
  int unit = 0;
  for (int i = 0; i < s.size(); ++i) {
    Vec3 grad = Vec3::Zero();
    for (int st = 0; st < g.stencils; ++st) grad += g.gradient(r.d, i, st);
    grad /= g.stencils;
    if (std::abs(grad.norm() - 1.0) < 1e-2) ++unit;
  }
  EXPECT_GE(unit, 0.95 * s.size());
}

int iterations(const GlobalSystem& s, const GradientOperator& g, Preconditioner pc) {
  SolveOptions options;
  options.preconditioner = pc;
  options.max_iterations = 20000;
  const SolveResult r = solve(s, g, options);
  EXPECT_TRUE(r.report.converged);
  return r.report.iterations;
}

TEST(Solve, JacobiPreconditionerOnReferenceSystem) {
  // Round-0 system of the sphere preset from a degraded estimate.
  const SyntheticScene scene = make_scene("sphere");
  std::vector<PsView> views = Renderer(scene).render_all();
  for (PsView& v : views) {
    for (std::size_t k = 0; k < v.images.size(); ++k) {
      v.valid_masks[k] = v.valid_masks[k] & saturation_mask(v.images[k]);
    }
  }
  const TriangleMesh initial = make_initial_estimate(scene, 2000, 10);
  const SignedDistance prior_field(initial);
  const SdfVolume v = build_volume(scene.bounds, 6, [&](const Vec3& p) { return prior_field(p); });
  const TriangleBvh bvh(initial);
  const MeshOccluder occluder(bvh, 1.5 * v.finest_edge());
  const VolumeSystems systems = assemble_volume(v, views, occluder, {});
  std::vector<double> prior(v.voxel_count());
  for (int i = 0; i < v.voxel_count(); ++i) prior[i] = prior_field(v.voxel(i).center);
  const GlobalSystem s = make_global_system(systems.systems, prior);
  const GradientOperator g = build_gradient(v);
  const int jacobi = iterations(s, g, Preconditioner::Jacobi);
  const int plain = iterations(s, g, Preconditioner::None);
  EXPECT_LE(jacobi, static_cast<int>(std::ceil(1.1 * plain)));
}

TEST(Solve, JacobiPreconditionerHelpsOnIllScaledSystem) {
  SdfVolume v = build_volume(Cube{Vec3::Zero(), 2.0}, 4, sphere_field);
  v = subdivide_band(v);
  std::vector<double> exact(v.voxel_count());
  for (int i = 0; i < v.voxel_count(); ++i) exact[i] = sphere_field(v.voxel(i).center);
  v.set_d(exact);
  const GradientOperator g = build_gradient(v);

  // Weights spanning four orders of magnitude across voxels.
  GlobalSystem s = analytic_system(v, 2.0, 7, 1.1);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> exponent(-2.0, 2.0);
  for (Mat3& b : s.b_prime) b *= std::pow(10.0, exponent(rng));
  EXPECT_LT(iterations(s, g, Preconditioner::Jacobi), iterations(s, g, Preconditioner::None));
}

TEST(Solve, NonConvergenceReturnsBestIterate) {
  const SdfVolume v = build_volume(Cube{Vec3::Zero(), 2.0}, 4, sphere_field);
  const GradientOperator g = build_gradient(v);
  const GlobalSystem s = analytic_system(v, 1000.0, 2, 0.5);
  SolveOptions options;
  options.max_iterations = 3;
  const SolveResult r = solve(s, g, options);
  EXPECT_FALSE(r.report.converged);
  EXPECT_EQ(r.report.iterations, 3);
  ASSERT_EQ(r.report.residual_history.size(), 4u);
  const double best =
      *std::min_element(r.report.residual_history.begin(), r.report.residual_history.end());
  EXPECT_NEAR(r.report.relative_residual, best, 1e-6 * best);
}

TEST(Solve, RejectsInconsistentSizes) {
  const SdfVolume v = build_volume(Cube{Vec3::Zero(), 2.0}, 3, sphere_field);
  const GradientOperator g = build_gradient(v);
  GlobalSystem s = analytic_system(v, 1.0, 1);
  s.prior.pop_back();
  EXPECT_THROW(solve(s, g), Error);
  GlobalSystem t = analytic_system(v, 1.0, 1);
  t.lambda = 0.0;
  EXPECT_THROW(solve(t, g), InputError);
  const GlobalSystem u = analytic_system(v, 1.0, 1);
  std::vector<double> wrong(3, 0.0);
  EXPECT_THROW(solve(u, g, {}, wrong), Error);
}

TEST(MakeGlobalSystem, CopiesBlocks) {
  std::vector<VoxelSystem> systems(2);
  systems[1].b_prime = 2.0 * Mat3::Identity();
  systems[1].q3 = Vec3::UnitX();
  const std::vector<double> prior{0.5, -0.5};
  const GlobalSystem s = make_global_system(systems, prior);
  EXPECT_EQ(s.size(), 2);
  EXPECT_EQ(s.lambda, kDefaultLambda);
  EXPECT_EQ(s.b_prime[1], 2.0 * Mat3::Identity());
  EXPECT_EQ(s.q[1], Vec3::UnitX());
  EXPECT_THROW(make_global_system(systems, std::vector<double>{1.0}), Error);
}

}  // namespace
}  // namespace mvps
