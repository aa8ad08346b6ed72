#include "mvps/solver.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <fmt/format.h>

namespace mvps {

void GradientOperator::apply(std::span<const double> d, std::span<double> out) const {
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const GradientRow& row = rows[r];
    out[r] = row.kind == DifferenceKind::Zero ? 0.0 : (d[row.hi] - d[row.lo]) * row.inv_spacing;
  }
}

void GradientOperator::apply_transpose(std::span<const double> g, std::span<double> out) const {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const GradientRow& row = rows[r];
    if (row.kind == DifferenceKind::Zero) continue;
    const double v = g[r] * row.inv_spacing;
    out[row.hi] += v;
    out[row.lo] -= v;
  }
}

Vec3 GradientOperator::gradient(std::span<const double> d, int voxel, int stencil) const {
  Vec3 out;
  for (int a = 0; a < 3; ++a) {
    const GradientRow& r = row(voxel, stencil, a);
    out[a] = r.kind == DifferenceKind::Zero ? 0.0 : (d[r.hi] - d[r.lo]) * r.inv_spacing;
  }
  return out;
}

std::size_t GradientOperator::zero_rows() const {
  std::size_t n = 0;
  for (const GradientRow& r : rows) n += r.kind == DifferenceKind::Zero;
  return n;
}

GradientOperator build_gradient(const SdfVolume& volume, GradientScheme scheme) {
  if (volume.voxel_count() == 0) throw Error("build_gradient: empty band");
  GradientOperator g;
  g.voxels = volume.voxel_count();
  g.stencils = scheme == GradientScheme::ForwardBackward ? 2 : 1;
  g.rows.resize(3 * static_cast<std::size_t>(g.stencils) * g.voxels);
  std::size_t isolated = 0;
  for (int v = 0; v < g.voxels; ++v) {
    const Vec3& c = volume.voxel(v).center;
    bool any = false;
    for (int a = 0; a < 3; ++a) {
      const Axis axis = static_cast<Axis>(a);
      GradientRow forward, backward;
      const auto f = volume.neighbor(v, axis, Direction::Positive);
      const auto b = volume.neighbor(v, axis, Direction::Negative);
      if (f) forward = {v, *f, 1.0 / (volume.voxel(*f).center[a] - c[a]), DifferenceKind::Forward};
      if (b) backward = {*b, v, 1.0 / (c[a] - volume.voxel(*b).center[a]), DifferenceKind::Backward};
      for (int s = 0; s < g.stencils; ++s) {
        const GradientRow& first = s == 0 ? forward : backward;
        const GradientRow& second = s == 0 ? backward : forward;
        g.rows[(static_cast<std::size_t>(v) * g.stencils + s) * 3 + a] =
            first.kind != DifferenceKind::Zero ? first : second;
      }
      any = any || f || b;
    }
    if (!any) ++isolated;
  }
  if (isolated > 0) spdlog::debug("gradient: {} isolated voxels held at the prior", isolated);
  return g;
}

void GlobalSystem::validate(const GradientOperator& g) const {
  if (!(lambda > 0.0)) throw InputError("solver: lambda must be positive");
  const auto n = static_cast<std::size_t>(g.voxels);
  if (prior.size() != n || b_prime.size() != n || q.size() != n) {
    throw Error("solver: system and gradient operator sizes disagree");
  }
}

GlobalSystem make_global_system(std::span<const VoxelSystem> systems,
                                std::span<const double> prior, double lambda) {
  if (systems.size() != prior.size()) throw Error("solver: one prior value per voxel required");
  GlobalSystem out;
  out.lambda = lambda;
  out.prior.assign(prior.begin(), prior.end());
  out.b_prime.reserve(systems.size());
  out.q.reserve(systems.size());
  for (const VoxelSystem& s : systems) {
    out.b_prime.push_back(s.b_prime);
    out.q.push_back(s.q3);
  }
  return out;
}

NormalEquations::NormalEquations(const GlobalSystem& system, const GradientOperator& g)
    : system_(system), g_(g) {
  system.validate(g);
  const int n = system.size();
  squared_.resize(n);
  const int stencils = g.stencils;
  std::vector<double> bq(g.row_count());
  for (int v = 0; v < n; ++v) {
    const Mat3& b = system.b_prime[v];
    squared_[v] = b.transpose() * b;
    const Vec3 t = b.transpose() * system.q[v];
    for (int s = 0; s < stencils; ++s) {
      for (int a = 0; a < 3; ++a) bq[(static_cast<std::size_t>(v) * stencils + s) * 3 + a] = t[a];
    }
  }
  rhs_.resize(n);
  g.apply_transpose(bq, rhs_);
  for (int v = 0; v < n; ++v) rhs_[v] += system.lambda * system.prior[v];

  // diag(G^T M G): per row triple, gather the column coefficients of the
  // (at most six) unknowns it touches.
  diagonal_.assign(n, system.lambda);
  for (int v = 0; v < n; ++v) {
    for (int s = 0; s < stencils; ++s) {
      std::array<int, 6> ids{};
      std::array<Vec3, 6> coef{};
      int used = 0;
      auto add = [&](int id, int axis, double value) {
        int slot = 0;
        while (slot < used && ids[slot] != id) ++slot;
        if (slot == used) {
          ids[used] = id;
          coef[used] = Vec3::Zero();
          ++used;
        }
        coef[slot][axis] += value;
      };
      for (int a = 0; a < 3; ++a) {
        const GradientRow& row = g.row(v, s, a);
        if (row.kind == DifferenceKind::Zero) continue;
        add(row.hi, a, row.inv_spacing);
        add(row.lo, a, -row.inv_spacing);
      }
      for (int i = 0; i < used; ++i) diagonal_[ids[i]] += coef[i].dot(squared_[v] * coef[i]);
    }
  }
  scratch_.resize(g.row_count());
}

void NormalEquations::apply(std::span<const double> x, std::span<double> out) const {
  const int n = size();
  g_.apply(x, scratch_);
  const int stencils = g_.stencils;
  for (int v = 0; v < n; ++v) {
    for (int s = 0; s < stencils; ++s) {
      double* y = &scratch_[(static_cast<std::size_t>(v) * stencils + s) * 3];
      const Vec3 z = squared_[v] * Vec3(y[0], y[1], y[2]);
      for (int a = 0; a < 3; ++a) y[a] = z[a];
    }
  }
  g_.apply_transpose(scratch_, out);
  for (int v = 0; v < n; ++v) out[v] += system_.lambda * x[v];
}

std::string SolveReport::summary() const {
  return fmt::format("cg: {} iterations, relative residual {:.3e}, {}, {:.3f} s", iterations,
                     relative_residual, converged ? "converged" : "NOT converged", seconds);
}

namespace {

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

SolveResult solve(const GlobalSystem& system, const GradientOperator& g,
                  const SolveOptions& options, std::span<const double> initial) {
  const auto start = std::chrono::steady_clock::now();
  const NormalEquations a(system, g);
  const std::size_t n = static_cast<std::size_t>(a.size());
  if (!initial.empty() && initial.size() != n) throw Error("solver: warm start has wrong size");

  SolveResult result;
  std::vector<double>& x = result.d;
  x = initial.empty() ? system.prior : std::vector<double>(initial.begin(), initial.end());

  const std::vector<double>& b = a.rhs();
  const double b_norm = std::sqrt(dot(b, b));
  std::vector<double> r(n), z(n), p(n), ap(n);
  a.apply(x, ap);
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - ap[i];

  auto precondition = [&](const std::vector<double>& in, std::vector<double>& out) {
    if (options.preconditioner == Preconditioner::Jacobi) {
      for (std::size_t i = 0; i < n; ++i) out[i] = in[i] / a.diagonal()[i];
    } else {
      out = in;
    }
  };
  auto relative = [&](double r_norm) { return b_norm > 0.0 ? r_norm / b_norm : r_norm; };

  SolveReport& report = result.report;
  double residual = relative(std::sqrt(dot(r, r)));
  report.residual_history.push_back(residual);
  std::vector<double> best = x;
  double best_residual = residual;

  precondition(r, z);
  p = z;
  double rz = dot(r, z);
  int it = 0;
  while (residual >= options.tolerance && it < options.max_iterations) {
    a.apply(p, ap);
    const double pap = dot(p, ap);
    if (!(pap > 0.0)) break;
    const double alpha = rz / pap;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * ap[i];
    }
    ++it;
    residual = relative(std::sqrt(dot(r, r)));
    report.residual_history.push_back(residual);
    if (residual < best_residual) {
      best_residual = residual;
      best = x;
    }
    if (options.observer) options.observer(it, x);
    if (options.log_every > 0 && it % options.log_every == 0) {
      const double t =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      spdlog::debug("cg iteration {} residual {:.3e} time {:.3f}s", it, residual, t);
    }
    precondition(r, z);
    const double rz_next = dot(r, z);
    const double beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }

  if (best_residual < residual) x = best;
  // Report the true residual of the returned iterate, not the recurrence.
  a.apply(x, ap);
  for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - ap[i];
  report.iterations = it;
  report.relative_residual = relative(std::sqrt(dot(r, r)));
  report.converged = report.relative_residual < options.tolerance;
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (report.converged) {
    spdlog::info(report.summary());
  } else {
    spdlog::warn(report.summary());
  }
  return result;
}

}  // namespace mvps
