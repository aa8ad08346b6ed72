#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <fstream>
#include <iostream>

#include "mvps/config.hpp"
#include "mvps/mesh_io.hpp"
#include "mvps/pipeline.hpp"
#include "mvps/synth.hpp"

namespace {

enum ExitCode { kSuccess = 0, kInputError = 1, kRuntimeFailure = 2, kWarnings = 3 };

int run_reconstruct(const std::string& config_path, bool albedo, const std::string& dump) {
  const mvps::SceneConfig config = mvps::load_config(config_path);
  std::optional<std::filesystem::path> dump_path;
  if (!dump.empty()) dump_path = dump;
  const mvps::Reconstruction result = mvps::reconstruct(config, albedo, dump_path);
  const mvps::RunReport& report = result.report;
  std::cout << "mesh: " << config.output.mesh.string() << " (" << report.vertices
            << " vertices, " << report.triangles << " triangles)\n";
  if (report.final_error) std::cout << "rms_hausdorff: " << report.final_error->rms << '\n';
  for (const std::string& w : report.warnings) spdlog::warn(w);
  return report.warnings.empty() ? kSuccess : kWarnings;
}

int run_evaluate(const std::string& rec, const std::string& gt, int samples, std::uint64_t seed,
                 const std::string& out) {
  const mvps::EvaluationReport report = mvps::evaluate(rec, gt, samples, seed);
  const std::string text = report.to_json().dump(2);
  std::cout << text << '\n';
  if (!out.empty()) {
    std::ofstream file(out);
    if (!file) throw mvps::Error("cannot write " + out);
    file << text << '\n';
  }
  return kSuccess;
}

int run_benchmark(const std::string& preset, const std::string& out, int samples) {
  const mvps::BenchmarkTable table = mvps::benchmark(preset, {}, samples);
  const std::string csv = table.to_csv();
  std::ofstream file(out);
  if (!file) throw mvps::Error("cannot write " + out);
  file << csv;
  std::cout << csv;
  bool failed = false;
  for (const mvps::BenchmarkCell& c : table.cells) failed = failed || !c.error.empty();
  return failed ? kWarnings : kSuccess;
}

int run_render(const std::string& preset, const std::string& out, int triangles, int noise,
               double image_noise, std::uint64_t seed) {
  mvps::SyntheticScene scene = mvps::make_scene(preset, seed);
  scene.noise_sigma = image_noise;
  scene.validate();
  const mvps::TriangleMesh initial = mvps::make_initial_estimate(scene, triangles, noise);
  const auto path = mvps::export_scene(scene, initial, out);
  std::cout << path.string() << '\n';
  return kSuccess;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Volumetric multi-view photometric stereo"};
  app.require_subcommand(1);
  bool verbose = false;
  bool quiet = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.add_flag("-q,--quiet", quiet, "Warnings and errors only");

  std::string config_path, dump_path;
  bool albedo = false;
  auto* rec = app.add_subcommand("reconstruct", "Reconstruct a surface from a scene config");
  rec->add_option("--config", config_path, "Scene config (JSON)")->required();
  rec->add_flag("--albedo", albedo, "Recover per-vertex albedo into the output mesh");
  rec->add_option("--dump-volume", dump_path, "Write the final octree volume");

  std::string rec_path, gt_path, eval_out;
  int samples = 20000;
  std::uint64_t seed = 1;
  auto* eval = app.add_subcommand("evaluate", "RMS/max Hausdorff distance between two meshes");
  eval->add_option("--rec", rec_path, "Reconstructed mesh")->required();
  eval->add_option("--gt", gt_path, "Ground-truth mesh")->required();
  eval->add_option("--samples", samples, "Surface samples per direction")
      ->check(CLI::PositiveNumber);
  eval->add_option("--seed", seed, "Sampling seed");
  eval->add_option("--out", eval_out, "Also write the JSON report here");

  std::string preset = "sphere", out;
  int bench_samples = 20000;
  auto* bench = app.add_subcommand("benchmark", "Initial-estimate quality sweep as CSV");
  bench->add_option("--preset", preset, "sphere, blob or two-object");
  bench->add_option("--out", out, "CSV output")->required();
  bench->add_option("--samples", bench_samples, "Hausdorff samples")->check(CLI::PositiveNumber);

  std::string render_preset = "sphere", render_out;
  int triangles = 1500, noise = 0;
  double image_noise = 0.0;
  std::uint64_t render_seed = 7;
  auto* render = app.add_subcommand("render", "Render a synthetic scene to a config directory");
  render->add_option("--preset", render_preset, "plane, sphere, blob, two-object or occluder");
  render->add_option("--out", render_out, "Output directory")->required();
  render->add_option("--triangles", triangles, "Initial estimate triangle budget");
  render->add_option("--noise", noise, "Initial estimate vertex noise (percent of edge length)");
  render->add_option("--image-noise", image_noise, "Image noise standard deviation");
  render->add_option("--seed", render_seed, "Scene seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kSuccess : kInputError;
  }
  spdlog::set_level(verbose ? spdlog::level::debug
                            : (quiet ? spdlog::level::warn : spdlog::level::info));

  try {
    if (*rec) return run_reconstruct(config_path, albedo, dump_path);
    if (*eval) return run_evaluate(rec_path, gt_path, samples, seed, eval_out);
    if (*bench) return run_benchmark(preset, out, bench_samples);
    if (*render) {
      return run_render(render_preset, render_out, triangles, noise, image_noise, render_seed);
    }
  } catch (const mvps::InputError& e) {
    spdlog::error("{}", e.what());
    return kInputError;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kRuntimeFailure;
  }
  return kRuntimeFailure;
}
