#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mvps/octree.hpp"
#include "mvps/photometric.hpp"

namespace mvps {

inline constexpr double kDefaultLambda = 0.05;
inline constexpr double kDefaultCgTolerance = 1e-6;
inline constexpr int kDefaultCgMaxIterations = 2000;

enum class DifferenceKind : std::uint8_t { Forward, Backward, Zero };

/// One row of G: (d[hi] - d[lo]) * inv_spacing. Zero rows have lo = hi = -1.
struct GradientRow {
  int lo = -1;
  int hi = -1;
  double inv_spacing = 0.0;
  DifferenceKind kind = DifferenceKind::Zero;
};

enum class GradientScheme {
  Forward,          // one triple per voxel: forward differences
  ForwardBackward,  // forward triple plus backward triple per voxel
};

/// Sparse finite-difference gradient over the band. Voxel v owns
/// `stencils` consecutive row triples; row (v * stencils + s) * 3 + a is the
/// derivative along axis a of stencil s.
struct GradientOperator {
  int voxels = 0;
  int stencils = 1;
  std::vector<GradientRow> rows;

  std::size_t row_count() const { return rows.size(); }
  const GradientRow& row(int voxel, int stencil, int axis) const {
    return rows[(static_cast<std::size_t>(voxel) * stencils + stencil) * 3 + axis];
  }
  /// out = G d; out has row_count() entries.
  void apply(std::span<const double> d, std::span<double> out) const;
  /// out = G^T g; out has `voxels` entries.
  void apply_transpose(std::span<const double> g, std::span<double> out) const;
  Vec3 gradient(std::span<const double> d, int voxel, int stencil = 0) const;
  std::size_t zero_rows() const;
};

/// Forward stencil: forward difference with the centre-to-centre spacing,
/// falling back to backward, then to a zero row. The backward stencil of
/// ForwardBackward mirrors it. Pairing both cancels the half-cell shift a
/// one-sided stencil imposes on the recovered surface.
GradientOperator build_gradient(const SdfVolume& volume,
                                GradientScheme scheme = GradientScheme::ForwardBackward);

/// min ||B' G d - q||^2 + lambda ||d - d0||^2 with one B' block and q vector
/// per voxel.
struct GlobalSystem {
  std::vector<Mat3> b_prime;
  std::vector<Vec3> q;
  std::vector<double> prior;
  double lambda = kDefaultLambda;

  int size() const { return static_cast<int>(prior.size()); }
  void validate(const GradientOperator& g) const;
};

GlobalSystem make_global_system(std::span<const VoxelSystem> systems,
                                std::span<const double> prior, double lambda = kDefaultLambda);

/// Normal-equation operator (G^T B'^2 G + lambda I) and right-hand side
/// G^T B' q + lambda d0; each stencil triple of voxel v uses B'_v and q_v.
class NormalEquations {
 public:
  NormalEquations(const GlobalSystem& system, const GradientOperator& g);

  int size() const { return system_.size(); }
  void apply(std::span<const double> x, std::span<double> out) const;
  const std::vector<double>& rhs() const { return rhs_; }
  const std::vector<double>& diagonal() const { return diagonal_; }

 private:
  const GlobalSystem& system_;
  const GradientOperator& g_;
  std::vector<Mat3> squared_;
  std::vector<double> rhs_;
  std::vector<double> diagonal_;
  mutable std::vector<double> scratch_;
};

enum class Preconditioner { Jacobi, None };

struct SolveOptions {
  double tolerance = kDefaultCgTolerance;  // on ||r|| / ||rhs||
  int max_iterations = kDefaultCgMaxIterations;
  Preconditioner preconditioner = Preconditioner::Jacobi;
  /// Log a progress line every `log_every` iterations (0: final line only).
  int log_every = 100;
  /// Called with the iteration number and the current iterate after every
  /// CG step.
  std::function<void(int, std::span<const double>)> observer;
};

struct SolveReport {
  int iterations = 0;
  double relative_residual = 0.0;
  bool converged = false;
  double seconds = 0.0;
  std::vector<double> residual_history;  // recurrence residual per iteration, starting at 0

  std::string summary() const;
};

struct SolveResult {
  std::vector<double> d;
  SolveReport report;
};

/// Preconditioned conjugate gradients on the normal equations, warm started
/// at `initial` (the prior when empty). On non-convergence returns the
/// iterate with the smallest residual and `converged = false`.
SolveResult solve(const GlobalSystem& system, const GradientOperator& g,
                  const SolveOptions& options = {}, std::span<const double> initial = {});

}  // namespace mvps
