#include "mvps/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <fmt/format.h>
#include <fstream>
#include <sstream>

#include "mvps/assembly.hpp"
#include "mvps/marching_cubes.hpp"
#include "mvps/mesh_io.hpp"
#include "mvps/raycast.hpp"
#include "mvps/solver.hpp"

namespace mvps {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

json stats_json(const DistanceStats& s) {
  return {{"rms", s.rms}, {"max", s.max}, {"mean", s.mean}, {"samples", s.samples}};
}

std::vector<PsView> apply_saturation(std::span<const PsView> views, const SolverConfig& solver) {
  std::vector<PsView> out(views.begin(), views.end());
  for (PsView& view : out) {
    view.validate();
    for (int k = 0; k < view.light_count(); ++k) {
      const Mask saturation =
          saturation_mask(view.images[k], solver.saturation_low, solver.saturation_high);
      view.valid_masks[k] = view.valid_masks[k] & saturation;
    }
  }
  return out;
}

}  // namespace

long peak_memory_kb() {
  std::ifstream status("/proc/self/status");
  std::string line;
  while (std::getline(status, line)) {
    if (line.rfind("VmHWM:", 0) == 0) {
      std::istringstream in(line.substr(6));
      long kb = 0;
      in >> kb;
      return kb;
    }
  }
  return 0;
}

json RunReport::to_json() const {
  json rounds_json = json::array();
  for (const RoundRecord& r : rounds) {
    json j = {{"round", r.round},
              {"level", r.level},
              {"voxels", r.voxels},
              {"equations", r.equations},
              {"weighted_equations", r.weighted_equations},
              {"well_constrained", r.well_constrained},
              {"masked_pixel_fraction", r.masked_fraction},
              {"shadowed_pair_fraction", r.shadowed_fraction},
              {"cg_iterations", r.cg_iterations},
              {"cg_residual", r.cg_residual},
              {"cg_converged", r.cg_converged},
              {"seconds", r.seconds},
              {"peak_memory_kb", r.peak_memory_kb}};
    if (r.rms_hausdorff) j["rms_hausdorff"] = *r.rms_hausdorff;
    rounds_json.push_back(std::move(j));
  }
  json j = {{"rounds", rounds_json},
            {"mesh", {{"vertices", vertices}, {"triangles", triangles}}},
            {"seconds", seconds},
            {"warnings", warnings}};
  if (initial_rms) j["initial_rms_hausdorff"] = *initial_rms;
  if (final_error) {
    j["rms_hausdorff"] = final_error->rms;
    j["max_hausdorff"] = final_error->max;
    j["evaluation_samples"] = evaluation_samples;
  }
  return j;
}

Reconstruction reconstruct(std::span<const PsView> input_views, const TriangleMesh& initial_mesh,
                           const Cube& bounds, const ReconstructionOptions& options) {
  const auto start = Clock::now();
  const SolverConfig& solver = options.solver;
  const std::vector<PsView> views = apply_saturation(input_views, solver);
  const SignedDistance prior_field(initial_mesh);
  const TriangleBvh initial_bvh(initial_mesh);

  Reconstruction out{{}, build_initial_volume(initial_mesh, bounds, solver.base_level), {}, {}, {}};
  RunReport& report = out.report;
  if (options.ground_truth) {
    report.initial_rms = rms_hausdorff(initial_mesh, *options.ground_truth,
                                       options.evaluation.samples, options.evaluation.seed);
  }

  AssemblyOptions assembly;
  assembly.pairing = solver.pairing;
  assembly.darkness_floor = solver.saturation_low;
  assembly.tau_rank = solver.tau_rank;
  SolveOptions solve_options;
  solve_options.tolerance = solver.cg_tolerance;
  solve_options.max_iterations = solver.cg_max_iters;

  int converged_streak = 0;
  for (int round = 0;; ++round) {
    const auto round_start = Clock::now();
    SdfVolume& volume = out.volume;
    RoundRecord record;
    record.round = round;
    record.level = volume.level();
    record.voxels = static_cast<std::size_t>(volume.voxel_count());

    std::vector<double> prior(volume.voxel_count());
    for (int v = 0; v < volume.voxel_count(); ++v) prior[v] = prior_field(volume.voxel(v).center);

    VolumeSystems systems;
    if (round == 0) {
      const MeshOccluder occluder(initial_bvh, 1.5 * volume.finest_edge());
      systems = assemble_volume(volume, views, occluder, assembly);
    } else {
      const VolumeOccluder occluder(volume);
      systems = assemble_volume(volume, views, occluder, assembly);
    }
    record.equations = systems.stats.equations;
    record.weighted_equations = systems.stats.weighted_equations;
    record.well_constrained = systems.stats.well_constrained;
    record.masked_fraction = systems.stats.masked_fraction();
    out.well_constrained.resize(systems.systems.size());
    for (std::size_t v = 0; v < systems.systems.size(); ++v) {
      out.well_constrained[v] = systems.systems[v].well_constrained;
    }
    record.shadowed_fraction = systems.stats.shadowed_fraction();

    const GradientOperator g = build_gradient(volume);
    const GlobalSystem system = make_global_system(systems.systems, prior, solver.lambda);
    SolveResult solution = solve(system, g, solve_options, volume.d());
    volume.set_d(std::move(solution.d));
    record.cg_iterations = solution.report.iterations;
    record.cg_residual = solution.report.relative_residual;
    record.cg_converged = solution.report.converged;
    if (!record.cg_converged) {
      report.warnings.push_back(fmt::format("round {}: {}", round, solution.report.summary()));
    }
    if (options.score_rounds && options.ground_truth) {
      const TriangleMesh mesh = extract_mesh(volume);
      if (!mesh.empty()) {
        record.rms_hausdorff = rms_hausdorff(mesh, *options.ground_truth,
                                             options.evaluation.samples, options.evaluation.seed);
      }
    }
    record.seconds = seconds_since(round_start);
    record.peak_memory_kb = peak_memory_kb();
    spdlog::info(
        "round {}: level {}, {} voxels, {} equations ({} weighted), {} well constrained, "
        "shadowed {:.2f}%, cg {} it, {:.1f}s",
        round, record.level, record.voxels, record.equations, record.weighted_equations,
        record.well_constrained, 100.0 * record.shadowed_fraction, record.cg_iterations,
        record.seconds);
    report.rounds.push_back(record);

    converged_streak = record.cg_converged ? converged_streak + 1 : 0;
    if (refinement_complete(volume, views)) break;
    if (volume.level() >= solver.max_level) break;
    SdfVolume next = subdivide_band(volume);
    const bool unchanged = next.voxel_count() == volume.voxel_count() &&
                           next.nodes().size() == volume.nodes().size();
    if (unchanged && converged_streak >= 2) {
      spdlog::info("band stagnated; stopping");
      break;
    }
    out.volume = std::move(next);
  }

  out.mesh = extract_mesh(out.volume);
  if (out.mesh.empty()) report.warnings.push_back("extracted mesh is empty");
  if (options.recover_albedo && !out.mesh.empty()) {
    const VolumeOccluder occluder(out.volume);
    out.albedo = recover_albedo(out.mesh, views, occluder);
    out.mesh.albedo.clear();
    for (double a : out.albedo->albedo) out.mesh.albedo.push_back(Vec3::Constant(a));
  }
  report.vertices = out.mesh.vertices.size();
  report.triangles = out.mesh.triangles.size();
  if (options.ground_truth && !out.mesh.empty()) {
    report.final_error = surface_distance(out.mesh, *options.ground_truth,
                                          options.evaluation.samples, options.evaluation.seed);
    report.evaluation_samples = options.evaluation.samples;
  }
  report.seconds = seconds_since(start);
  return out;
}

std::vector<PsView> load_views(const SceneConfig& config) {
  std::vector<PsView> views;
  for (const ViewConfig& vc : config.views) {
    PsView view{vc.camera, {}, {}, {}};
    for (const LightConfig& lc : vc.lights) {
      view.lights.push_back(lc.light);
      view.images.push_back(read_png(lc.image));
      view.valid_masks.emplace_back(view.images.back().width, view.images.back().height);
    }
    view.validate();
    views.push_back(std::move(view));
  }
  return views;
}

Reconstruction reconstruct(const SceneConfig& config, bool recover_albedo,
                           const std::optional<fs::path>& dump_volume) {
  config.validate(true);
  const std::vector<PsView> views = load_views(config);
  const TriangleMesh initial = read_mesh(config.initial_mesh);
  std::optional<TriangleMesh> truth;
  if (config.ground_truth) truth = read_mesh(*config.ground_truth);

  ReconstructionOptions options;
  options.solver = config.solver;
  options.recover_albedo = recover_albedo;
  options.evaluation = config.evaluation;
  if (truth) options.ground_truth = &*truth;
  Reconstruction result = reconstruct(views, initial, config.volume, options);

  if (!config.output.mesh.empty()) {
    if (config.output.mesh.has_parent_path()) fs::create_directories(config.output.mesh.parent_path());
    write_mesh(config.output.mesh, result.mesh);
  }
  if (!config.output.report.empty()) {
    if (config.output.report.has_parent_path()) {
      fs::create_directories(config.output.report.parent_path());
    }
    std::ofstream out(config.output.report);
    if (!out) throw Error("cannot write report " + config.output.report.string());
    out << result.report.to_json().dump(2) << '\n';
  }
  if (dump_volume) write_volume_dump(*dump_volume, result.volume);
  return result;
}

json EvaluationReport::to_json() const {
  return {{"reconstruction_to_truth", stats_json(reconstruction_to_truth)},
          {"truth_to_reconstruction", stats_json(truth_to_reconstruction)},
          {"rms_hausdorff", reconstruction_to_truth.rms},
          {"max_hausdorff", std::max(reconstruction_to_truth.max, truth_to_reconstruction.max)}};
}

EvaluationReport evaluate(const TriangleMesh& reconstructed, const TriangleMesh& ground_truth,
                          int samples, std::uint64_t seed) {
  if (samples < 1) throw InputError("evaluate: samples must be >= 1");
  return {surface_distance(reconstructed, ground_truth, samples, seed),
          surface_distance(ground_truth, reconstructed, samples, seed)};
}

EvaluationReport evaluate(const fs::path& reconstructed, const fs::path& ground_truth, int samples,
                          std::uint64_t seed) {
  return evaluate(read_mesh(reconstructed), read_mesh(ground_truth), samples, seed);
}

const BenchmarkCell* BenchmarkTable::find(int triangles, int noise_percent) const {
  for (const BenchmarkCell& c : cells) {
    if (!c.estimate.visual_hull && c.estimate.triangles == triangles &&
        c.estimate.noise_percent == noise_percent) {
      return &c;
    }
  }
  return nullptr;
}

const BenchmarkCell* BenchmarkTable::visual_hull() const {
  for (const BenchmarkCell& c : cells) {
    if (c.estimate.visual_hull) return &c;
  }
  return nullptr;
}

std::string BenchmarkTable::to_csv() const {
  auto value = [](const BenchmarkCell* c) {
    return (c && c->final_rms) ? fmt::format("{:.6f}", *c->final_rms) : std::string("NA");
  };
  std::string csv = "noise_percent";
  for (int b : kBenchmarkBudgets) csv += fmt::format(",{}", b);
  csv += ",visual_hull\n";
  for (int noise : kBenchmarkNoise) {
    csv += std::to_string(noise);
    for (int b : kBenchmarkBudgets) csv += "," + value(find(b, noise));
    csv += "," + value(noise == 0 ? visual_hull() : nullptr) + "\n";
  }
  return csv;
}

BenchmarkTable benchmark(const std::string& preset, const SolverConfig& solver, int samples,
                         std::uint64_t seed) {
  Benchmark bench = make_benchmark(preset, seed);
  SolverConfig config = solver;
  config.base_level = bench.scene.base_level;
  config.max_level = bench.scene.max_level;
  const Renderer renderer(bench.scene);
  const std::vector<PsView> views = renderer.render_all();

  BenchmarkTable table{preset, {}};
  for (InitialEstimate& estimate : bench.estimates) {
    BenchmarkCell cell;
    cell.estimate = estimate;
    cell.estimate.mesh = {};
    try {
      ReconstructionOptions options;
      options.solver = config;
      options.ground_truth = &bench.scene.ground_truth;
      options.evaluation.samples = samples;
      Reconstruction r = reconstruct(views, estimate.mesh, bench.scene.bounds, options);
      cell.initial_rms = r.report.initial_rms;
      if (r.report.final_error) cell.final_rms = r.report.final_error->rms;
      cell.report = std::move(r.report);
      spdlog::info("benchmark {} {}: initial {:.4f} final {:.4f}", preset, estimate.label(),
                   cell.initial_rms.value_or(-1.0), cell.final_rms.value_or(-1.0));
    } catch (const std::exception& e) {
      cell.error = e.what();
      spdlog::error("benchmark {} {}: {}", preset, estimate.label(), e.what());
    }
    table.cells.push_back(std::move(cell));
  }
  return table;
}

}  // namespace mvps
