#include "mvps/config.hpp"

#include <fstream>
#include <json.hpp>

namespace mvps {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

Vec3 vec3(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 3) throw InputError(std::string(what) + ": expected 3 numbers");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

Vec2 vec2(const json& j, const char* what) {
  if (!j.is_array() || j.size() != 2) throw InputError(std::string(what) + ": expected 2 numbers");
  return {j[0].get<double>(), j[1].get<double>()};
}

json array(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

fs::path resolve(const fs::path& p, const fs::path& base) {
  return p.is_absolute() ? p : base / p;
}

std::string relative_string(const fs::path& p, const fs::path& base) {
  if (base.empty()) return p.generic_string();
  std::error_code ec;
  const fs::path r = fs::relative(p, base, ec);
  return (ec || r.empty()) ? p.generic_string() : r.generic_string();
}

Camera parse_camera(const json& j) {
  const json& r = j.at("rotation");
  if (!r.is_array() || r.size() != 3) throw InputError("camera.rotation: expected 3x3 rows");
  Mat3 rotation;
  for (int i = 0; i < 3; ++i) rotation.row(i) = vec3(r[i], "camera.rotation").transpose();
  const json& res = j.at("resolution");
  if (!res.is_array() || res.size() != 2) throw InputError("camera.resolution: expected [w, h]");
  return Camera(rotation, vec3(j.at("translation"), "camera.translation"),
                j.at("focal_length").get<double>(),
                vec2(j.at("principal_point"), "camera.principal_point"), res[0].get<int>(),
                res[1].get<int>());
}

json camera_json(const Camera& c) {
  json rotation = json::array();
  for (int i = 0; i < 3; ++i) rotation.push_back(array(c.rotation().row(i).transpose()));
  return {{"rotation", rotation},
          {"translation", array(c.translation())},
          {"focal_length", c.focal_length()},
          {"principal_point", json::array({c.principal_point().x(), c.principal_point().y()})},
          {"resolution", json::array({c.width(), c.height()})}};
}

Pairing parse_pairing(const std::string& s) {
  if (s == "all") return Pairing::All;
  if (s == "adjacent") return Pairing::Adjacent;
  throw InputError("solver.pairing: expected \"all\" or \"adjacent\", got \"" + s + "\"");
}

}  // namespace

void SceneConfig::validate(bool check_files) const {
  if (schema_version != kConfigSchemaVersion) {
    throw InputError("config: unsupported schema_version " + std::to_string(schema_version));
  }
  if (units != "mm") throw InputError("config: units must be \"mm\", got \"" + units + "\"");
  if (!(volume.half_size > 0.0) || !is_finite(volume.center)) {
    throw InputError("config: volume needs a finite centre and positive half_size");
  }
  if (views.empty()) throw InputError("config: at least one view required");
  for (std::size_t q = 0; q < views.size(); ++q) {
    if (views[q].lights.size() < 2) {
      throw InputError("config: view " + std::to_string(q) + " needs at least 2 lights");
    }
    for (const LightConfig& l : views[q].lights) l.light.validate();
  }
  const SolverConfig& s = solver;
  if (!(s.lambda > 0.0)) throw InputError("solver.lambda must be positive");
  if (!(s.cg_tolerance > 0.0 && s.cg_tolerance < 1.0)) {
    throw InputError("solver.cg_tolerance must lie in (0, 1)");
  }
  if (s.cg_max_iters < 1) throw InputError("solver.cg_max_iters must be >= 1");
  if (s.base_level < 0 || s.base_level > s.max_level || s.max_level > 12) {
    throw InputError("solver: require 0 <= base_level <= max_level <= 12");
  }
  if (!(s.saturation_low >= 0.0 && s.saturation_low < s.saturation_high &&
        s.saturation_high <= 1.0)) {
    throw InputError("solver: require 0 <= saturation_low < saturation_high <= 1");
  }
  if (!(s.tau_rank > 0.0 && s.tau_rank < 1.0)) throw InputError("solver.tau_rank must lie in (0, 1)");
  if (evaluation.samples < 1) throw InputError("evaluation.samples must be >= 1");
  if (!check_files) return;
  auto require = [](const fs::path& p, const char* what) {
    if (!fs::is_regular_file(p)) {
      throw InputError(std::string(what) + " not found: " + p.string());
    }
  };
  require(initial_mesh, "initial mesh");
  if (ground_truth) require(*ground_truth, "ground truth mesh");
  for (const ViewConfig& v : views) {
    for (const LightConfig& l : v.lights) require(l.image, "image");
  }
}

SceneConfig parse_config(const json& j, const fs::path& base_dir) {
  SceneConfig c;
  try {
    c.schema_version = j.at("schema_version").get<int>();
    c.units = j.at("units").get<std::string>();
    const json& vol = j.at("volume");
    c.volume = Cube{vec3(vol.at("center"), "volume.center"), vol.at("half_size").get<double>()};
    for (const json& jv : j.at("views")) {
      ViewConfig view{parse_camera(jv.at("camera")), {}};
      for (const json& jl : jv.at("lights")) {
        LightConfig l;
        l.light.position = vec3(jl.at("position"), "light.position");
        l.light.direction = vec3(jl.at("direction"), "light.direction");
        l.light.brightness = jl.at("brightness").get<double>();
        l.light.mu = jl.value("mu", 1.0);
        l.image = resolve(jl.at("image").get<std::string>(), base_dir);
        view.lights.push_back(std::move(l));
      }
      c.views.push_back(std::move(view));
    }
    c.initial_mesh = resolve(j.at("initial_mesh").get<std::string>(), base_dir);
    if (j.contains("ground_truth") && !j["ground_truth"].is_null()) {
      c.ground_truth = resolve(j["ground_truth"].get<std::string>(), base_dir);
    }
    if (j.contains("solver")) {
      const json& s = j["solver"];
      c.solver.lambda = s.value("lambda", c.solver.lambda);
      c.solver.cg_tolerance = s.value("cg_tolerance", c.solver.cg_tolerance);
      c.solver.cg_max_iters = s.value("cg_max_iters", c.solver.cg_max_iters);
      c.solver.base_level = s.value("base_level", c.solver.base_level);
      c.solver.max_level = s.value("max_level", c.solver.max_level);
      c.solver.saturation_low = s.value("saturation_low", c.solver.saturation_low);
      c.solver.saturation_high = s.value("saturation_high", c.solver.saturation_high);
      c.solver.tau_rank = s.value("tau_rank", c.solver.tau_rank);
      c.solver.pairing = parse_pairing(s.value("pairing", std::string("all")));
    }
    if (j.contains("evaluation")) {
      c.evaluation.samples = j["evaluation"].value("samples", c.evaluation.samples);
      c.evaluation.seed = j["evaluation"].value("seed", c.evaluation.seed);
    }
    if (j.contains("output")) {
      const json& o = j["output"];
      if (o.contains("mesh")) c.output.mesh = o["mesh"].get<std::string>();
      if (o.contains("report")) c.output.report = o["report"].get<std::string>();
    }
    c.output.mesh = resolve(c.output.mesh, base_dir);
    c.output.report = resolve(c.output.report, base_dir);
  } catch (const json::exception& e) {
    throw InputError(std::string("config: ") + e.what());
  } catch (const InputError&) {
    throw;
  } catch (const Error& e) {
    throw InputError(std::string("config: ") + e.what());
  }
  return c;
}

json to_json(const SceneConfig& c, const fs::path& base_dir) {
  json views = json::array();
  for (const ViewConfig& v : c.views) {
    json lights = json::array();
    for (const LightConfig& l : v.lights) {
      lights.push_back(json{{"position", array(l.light.position)},
                        {"direction", array(l.light.direction)},
                        {"brightness", l.light.brightness},
                        {"mu", l.light.mu},
                        {"image", relative_string(l.image, base_dir)}});
    }
    views.push_back(json{{"camera", camera_json(v.camera)}, {"lights", lights}});
  }
  json j = {
      {"schema_version", c.schema_version},
      {"units", c.units},
      {"volume", {{"center", array(c.volume.center)}, {"half_size", c.volume.half_size}}},
      {"views", views},
      {"initial_mesh", relative_string(c.initial_mesh, base_dir)},
      {"solver",
       {{"lambda", c.solver.lambda},
        {"cg_tolerance", c.solver.cg_tolerance},
        {"cg_max_iters", c.solver.cg_max_iters},
        {"base_level", c.solver.base_level},
        {"max_level", c.solver.max_level},
        {"saturation_low", c.solver.saturation_low},
        {"saturation_high", c.solver.saturation_high},
        {"tau_rank", c.solver.tau_rank},
        {"pairing", c.solver.pairing == Pairing::All ? "all" : "adjacent"}}},
      {"evaluation", {{"samples", c.evaluation.samples}, {"seed", c.evaluation.seed}}},
      {"output",
       {{"mesh", relative_string(c.output.mesh, base_dir)},
        {"report", relative_string(c.output.report, base_dir)}}},
  };
  if (c.ground_truth) j["ground_truth"] = relative_string(*c.ground_truth, base_dir);
  return j;
}

SceneConfig load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InputError("config " + path.string() + ": " + e.what());
  }
  SceneConfig c = parse_config(j, path.parent_path());
  c.validate(true);
  return c;
}

void save_config(const SceneConfig& config, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write config " + path.string());
  out << to_json(config, path.parent_path()).dump(2) << '\n';
}

}  // namespace mvps
