#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "mvps/camera.hpp"
#include "mvps/light.hpp"
#include "mvps/photometric.hpp"
#include "mvps/solver.hpp"

namespace mvps {

inline constexpr int kConfigSchemaVersion = 1;

struct LightConfig {
  PointLight light;
  std::filesystem::path image;
};

struct ViewConfig {
  Camera camera;
  std::vector<LightConfig> lights;
};

struct SolverConfig {
  double lambda = kDefaultLambda;
  double cg_tolerance = kDefaultCgTolerance;
  int cg_max_iters = kDefaultCgMaxIterations;
  int base_level = 6;
  int max_level = 8;
  double saturation_low = kDefaultSaturationLow;
  double saturation_high = kDefaultSaturationHigh;
  double tau_rank = kDefaultRankThreshold;
  Pairing pairing = Pairing::All;
};

struct EvaluationConfig {
  int samples = 20000;
  std::uint64_t seed = 1;
};

struct OutputConfig {
  std::filesystem::path mesh = "reconstruction.ply";
  std::filesystem::path report = "report.json";
};

/// Everything one reconstruction needs. Relative paths are resolved
/// against the directory of the config file on load.
struct SceneConfig {
  int schema_version = kConfigSchemaVersion;
  std::string units = "mm";
  Cube volume;
  std::vector<ViewConfig> views;
  std::filesystem::path initial_mesh;
  std::optional<std::filesystem::path> ground_truth;
  SolverConfig solver;
  EvaluationConfig evaluation;
  OutputConfig output;

  /// Range checks; with `check_files`, also that every input file exists.
  void validate(bool check_files = true) const;
};

SceneConfig parse_config(const nlohmann::json& json, const std::filesystem::path& base_dir);
nlohmann::json to_json(const SceneConfig& config, const std::filesystem::path& base_dir);

/// Throws InputError on unreadable, malformed or out-of-range configs.
SceneConfig load_config(const std::filesystem::path& path);
/// Writes paths relative to the config's directory where possible.
void save_config(const SceneConfig& config, const std::filesystem::path& path);

}  // namespace mvps
