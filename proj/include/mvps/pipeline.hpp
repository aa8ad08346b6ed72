#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvps/config.hpp"
#include "mvps/distance.hpp"
#include "mvps/octree.hpp"
#include "mvps/photometric.hpp"
#include "mvps/synth.hpp"

namespace mvps {

struct RoundRecord {
  int round = 0;
  int level = 0;
  std::size_t voxels = 0;
  std::size_t equations = 0;
  std::size_t weighted_equations = 0;
  std::size_t well_constrained = 0;
  double masked_fraction = 0.0;
  double shadowed_fraction = 0.0;
  int cg_iterations = 0;
  double cg_residual = 0.0;
  bool cg_converged = false;
  double seconds = 0.0;
  long peak_memory_kb = 0;
  std::optional<double> rms_hausdorff;  // only when tracking rounds against a ground truth
};

struct RunReport {
  std::vector<RoundRecord> rounds;
  std::optional<double> initial_rms;
  std::optional<DistanceStats> final_error;
  int evaluation_samples = 0;
  std::size_t vertices = 0;
  std::size_t triangles = 0;
  double seconds = 0.0;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
};

struct ReconstructionOptions {
  SolverConfig solver;
  bool recover_albedo = false;
  /// Enables the rms_hausdorff fields of the report.
  const TriangleMesh* ground_truth = nullptr;
  EvaluationConfig evaluation;
  /// Also extract and score a mesh after every round (needs ground_truth).
  bool score_rounds = false;
};

struct Reconstruction {
  TriangleMesh mesh;
  SdfVolume volume;
  RunReport report;
  std::optional<AlbedoEstimate> albedo;
  /// Per voxel of `volume`: well-constrained flag of the last round's assembly.
  std::vector<char> well_constrained;
};

/// Coarse-to-fine reconstruction: per round, ratio equations against the
/// frozen geometry (initial mesh on round 0, the volume after), global
/// solve, then band subdivision until the pixel footprint, max_level or a
/// stagnant band stops the loop. Images are masked with the solver's
/// saturation thresholds on top of any masks already present.
Reconstruction reconstruct(std::span<const PsView> views, const TriangleMesh& initial_mesh,
                           const Cube& bounds, const ReconstructionOptions& options);

/// Loads every image of the config. Throws InputError on any failure.
std::vector<PsView> load_views(const SceneConfig& config);

/// Loads all inputs before computing, reconstructs, writes the mesh and the
/// JSON report to the configured outputs.
Reconstruction reconstruct(const SceneConfig& config, bool recover_albedo = false,
                           const std::optional<std::filesystem::path>& dump_volume = {});

struct EvaluationReport {
  DistanceStats reconstruction_to_truth;
  DistanceStats truth_to_reconstruction;
  nlohmann::json to_json() const;
};

EvaluationReport evaluate(const TriangleMesh& reconstructed, const TriangleMesh& ground_truth,
                          int samples, std::uint64_t seed = 1);
EvaluationReport evaluate(const std::filesystem::path& reconstructed,
                          const std::filesystem::path& ground_truth, int samples,
                          std::uint64_t seed = 1);

struct BenchmarkCell {
  InitialEstimate estimate;  // mesh cleared after the run
  std::optional<double> initial_rms;
  std::optional<double> final_rms;
  std::string error;
  RunReport report;
};

struct BenchmarkTable {
  std::string preset;
  std::vector<BenchmarkCell> cells;

  const BenchmarkCell* find(int triangles, int noise_percent) const;
  const BenchmarkCell* visual_hull() const;
  /// Rows: noise levels; columns: triangle budgets then the visual hull.
  std::string to_csv() const;
};

/// Runs reconstruct for every initial estimate of the preset. Per-cell
/// failures are recorded and the sweep continues.
BenchmarkTable benchmark(const std::string& preset, const SolverConfig& solver = {},
                         int samples = 20000, std::uint64_t seed = 7);

/// Peak resident set size of this process in kB (0 when unavailable).
long peak_memory_kb();

}  // namespace mvps
