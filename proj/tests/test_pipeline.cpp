#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "mvps/assembly.hpp"
#include "mvps/config.hpp"
#include "mvps/distance.hpp"
#include "mvps/mesh_io.hpp"
#include "mvps/octree.hpp"
#include "mvps/pipeline.hpp"
#include "mvps/synth.hpp"
#include "support.hpp"

namespace mvps {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class SpherePipeline : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    scene_ = new SyntheticScene(make_scene("sphere"));
    views_ = new std::vector<PsView>(Renderer(*scene_).render_all());
    initial_ = new TriangleMesh(make_initial_estimate(*scene_, 1500, 10));
  }
  static void TearDownTestSuite() {
    delete initial_;
    delete views_;
    delete scene_;
  }
  static ReconstructionOptions options(int base, int max) {
    ReconstructionOptions o;
    o.solver.base_level = base;
    o.solver.max_level = max;
    return o;
  }
  static SyntheticScene* scene_;
  static std::vector<PsView>* views_;
  static TriangleMesh* initial_;
};
SyntheticScene* SpherePipeline::scene_ = nullptr;
std::vector<PsView>* SpherePipeline::views_ = nullptr;
TriangleMesh* SpherePipeline::initial_ = nullptr;

TEST_F(SpherePipeline, SingleRoundWhenMaxLevelIsBase) {
  const Reconstruction r = reconstruct(*views_, *initial_, scene_->bounds, options(5, 5));
  ASSERT_EQ(r.report.rounds.size(), 1u);
  EXPECT_EQ(r.report.rounds[0].level, 5);
  EXPECT_EQ(r.volume.level(), 5);
  EXPECT_FALSE(r.mesh.empty());
  EXPECT_EQ(r.report.vertices, r.mesh.vertices.size());
  EXPECT_EQ(r.report.triangles, r.mesh.triangles.size());
}

TEST_F(SpherePipeline, EquationCountMatchesEmittedEquations) {
  const Reconstruction r = reconstruct(*views_, *initial_, scene_->bounds, options(5, 5));
  const RoundRecord& round = r.report.rounds.at(0);

  // Replay round 0: saturation masks, initial volume, mesh occluder.
  std::vector<PsView> views = *views_;
  for (PsView& v : views) {
    for (std::size_t k = 0; k < v.images.size(); ++k) {
      v.valid_masks[k] = v.valid_masks[k] & saturation_mask(v.images[k]);
    }
  }
  const SdfVolume volume = build_initial_volume(*initial_, scene_->bounds, 5);
  ASSERT_EQ(static_cast<std::size_t>(volume.voxel_count()), round.voxels);
  const TriangleBvh bvh(*initial_);
  const MeshOccluder occluder(bvh, 1.5 * volume.finest_edge());
  std::size_t emitted = 0, weighted = 0;
  std::size_t visible_view_pairs = 0;
  for (int v = 0; v < volume.voxel_count(); ++v) {
    const auto eqs = point_equations(volume.voxel(v).center, volume.voxel_gradient(v), views,
                                     occluder, {});
    emitted += eqs.size();
    for (const auto& e : eqs) weighted += e.weight > 0.0;
    for (const PsView& view : views) visible_view_pairs += view.camera.project(volume.voxel(v).center).in_frustum;
  }
  EXPECT_EQ(round.equations, emitted);
  EXPECT_EQ(round.weighted_equations, weighted);
  // At most C(8, 2) per voxel and view.
  EXPECT_LE(round.equations, 28 * visible_view_pairs);
  EXPECT_GT(round.equations, 0u);
}

TEST_F(SpherePipeline, DeterministicMeshAndVolume) {
  test::TempDir dir("pipeline");
  const Reconstruction a = reconstruct(*views_, *initial_, scene_->bounds, options(5, 6));
  const Reconstruction b = reconstruct(*views_, *initial_, scene_->bounds, options(5, 6));
  ASSERT_EQ(a.mesh.vertices.size(), b.mesh.vertices.size());
  EXPECT_EQ(std::memcmp(a.mesh.vertices.data(), b.mesh.vertices.data(),
                        a.mesh.vertices.size() * sizeof(Vec3)),
            0);
  EXPECT_EQ(a.mesh.triangles, b.mesh.triangles);
  write_volume_dump(dir.path() / "a.sdf", a.volume);
  write_volume_dump(dir.path() / "b.sdf", b.volume);
  EXPECT_EQ(slurp(dir.path() / "a.sdf"), slurp(dir.path() / "b.sdf"));
}

TEST_F(SpherePipeline, ImprovesOnNoisyEstimate) {
  ReconstructionOptions o = options(6, 6);
  o.ground_truth = &scene_->ground_truth;
  const Reconstruction r = reconstruct(*views_, *initial_, scene_->bounds, o);
  ASSERT_TRUE(r.report.initial_rms);
  ASSERT_TRUE(r.report.final_error);
  EXPECT_LT(r.report.final_error->rms, *r.report.initial_rms);
}

TEST_F(SpherePipeline, NonConvergenceIsAWarning) {
  ReconstructionOptions o = options(5, 5);
  o.solver.cg_max_iters = 2;
  const Reconstruction r = reconstruct(*views_, *initial_, scene_->bounds, o);
  EXPECT_FALSE(r.report.rounds.at(0).cg_converged);
  EXPECT_EQ(r.report.rounds[0].cg_iterations, 2);
  ASSERT_FALSE(r.report.warnings.empty());
  EXPECT_FALSE(r.mesh.empty());
  const auto j = r.report.to_json();
  EXPECT_EQ(j["rounds"].size(), 1u);
}

// Plane preset: cheap to render and export.
class ExportedScene : public ::testing::Test {
 protected:
  void SetUp() override {
    scene_ = make_scene("plane");
    initial_ = make_initial_estimate(scene_, 500, 0);
    config_path_ = export_scene(scene_, initial_, dir_.path() / "scene");
  }
  test::TempDir dir_{"export"};
  SyntheticScene scene_ = make_scene("plane");
  TriangleMesh initial_;
  fs::path config_path_;
};

TEST_F(ExportedScene, ConfigRoundTrip) {
  const SceneConfig c = load_config(config_path_);
  EXPECT_EQ(c.schema_version, kConfigSchemaVersion);
  EXPECT_EQ(c.solver.base_level, scene_.base_level);
  EXPECT_EQ(c.solver.max_level, scene_.max_level);
  EXPECT_DOUBLE_EQ(c.solver.lambda, 0.05);
  EXPECT_LT((c.volume.center - scene_.bounds.center).norm(), 1e-12);
  ASSERT_EQ(c.views.size(), scene_.views.size());
  for (std::size_t q = 0; q < c.views.size(); ++q) {
    const Camera& a = c.views[q].camera;
    const Camera& b = scene_.views[q].camera;
    EXPECT_LT((a.center() - b.center()).norm(), 1e-9);
    EXPECT_LT((a.project(Vec3(1, 2, 3)).pixel - b.project(Vec3(1, 2, 3)).pixel).norm(), 1e-9);
    ASSERT_EQ(c.views[q].lights.size(), scene_.views[q].lights.size());
    for (std::size_t k = 0; k < c.views[q].lights.size(); ++k) {
      const PointLight& l = c.views[q].lights[k].light;
      EXPECT_LT((l.position - scene_.views[q].lights[k].position).norm(), 1e-9);
      EXPECT_DOUBLE_EQ(l.brightness, scene_.views[q].lights[k].brightness);
    }
  }
  // Saving and reloading changes nothing.
  save_config(c, dir_.path() / "scene" / "copy.json");
  const SceneConfig d = load_config(dir_.path() / "scene" / "copy.json");
  EXPECT_EQ(to_json(c, dir_.path()), to_json(d, dir_.path()));
}

TEST_F(ExportedScene, ImagesMatchRenderWithinQuantisation) {
  const SceneConfig c = load_config(config_path_);
  const std::vector<PsView> views = load_views(c);
  const Renderer renderer(scene_);
  const Image direct = renderer.render(2, 5);
  const Image& loaded = views[2].images[5];
  ASSERT_EQ(loaded.pixels.size(), direct.pixels.size());
  for (std::size_t i = 0; i < direct.pixels.size(); ++i) {
    EXPECT_NEAR(loaded.pixels[i], direct.pixels[i], 0.5 / 65535.0 + 1e-7);
  }
}

nlohmann::json read_json(const fs::path& p) {
  std::ifstream in(p);
  return nlohmann::json::parse(in);
}

void write_json(const fs::path& p, const nlohmann::json& j) {
  std::ofstream out(p);
  out << j.dump(2);
}

TEST_F(ExportedScene, InvalidConfigsRejected) {
  const nlohmann::json good = read_json(config_path_);
  const fs::path bad = config_path_.parent_path() / "bad.json";
  auto expect_rejected = [&](const std::function<void(nlohmann::json&)>& edit) {
    nlohmann::json j = good;
    edit(j);
    write_json(bad, j);
    EXPECT_THROW(load_config(bad), InputError) << j.dump().substr(0, 80);
  };
  expect_rejected([](auto& j) { j["schema_version"] = 99; });
  expect_rejected([](auto& j) { j["solver"]["lambda"] = -1.0; });
  expect_rejected([](auto& j) { j["solver"]["base_level"] = 8; j["solver"]["max_level"] = 7; });
  expect_rejected([](auto& j) { j["solver"]["pairing"] = "some"; });
  expect_rejected([](auto& j) { j["solver"]["saturation_low"] = 0.99; });
  expect_rejected([](auto& j) { j["initial_mesh"] = "missing.ply"; });
  expect_rejected([](auto& j) { j["views"][0]["lights"][0]["image"] = "missing.png"; });
  expect_rejected([](auto& j) { j["units"] = "inch"; });
  expect_rejected([](auto& j) { j.erase("views"); });
  {
    std::ofstream out(bad);
    out << "{ not json";
  }
  EXPECT_THROW(load_config(bad), InputError);
  EXPECT_THROW(load_config(config_path_.parent_path() / "nothing.json"), InputError);
}

TEST_F(ExportedScene, UnreadableImageFailsBeforeCompute) {
  SceneConfig c = load_config(config_path_);
  {
    std::ofstream out(c.views[1].lights[3].image, std::ios::trunc);
    out << "not a png";
  }
  c.output.mesh = dir_.path() / "out" / "mesh.ply";
  EXPECT_THROW(reconstruct(c), InputError);
  EXPECT_FALSE(fs::exists(c.output.mesh));
}

TEST(Evaluate, IdenticalAndConcentric) {
  test::TempDir dir("pipeline");
  const TriangleMesh sphere = make_icosphere(6, 1.0);
  write_mesh(dir.path() / "a.ply", sphere);
  write_mesh(dir.path() / "b.ply", make_icosphere(6, 1.1));
  const EvaluationReport same = evaluate(dir.path() / "a.ply", dir.path() / "a.ply", 5000);
  EXPECT_LT(same.reconstruction_to_truth.rms, 1e-12);
  EXPECT_LT(same.truth_to_reconstruction.max, 1e-12);
  const EvaluationReport offset = evaluate(dir.path() / "a.ply", dir.path() / "b.ply", 5000);
  EXPECT_NEAR(offset.reconstruction_to_truth.rms, 0.1, 1e-3);
  EXPECT_NEAR(offset.truth_to_reconstruction.rms, 0.1, 1e-3);
  const auto j = offset.to_json();
  EXPECT_TRUE(j.contains("reconstruction_to_truth"));
  EXPECT_THROW(evaluate(dir.path() / "a.ply", dir.path() / "none.ply", 10), InputError);
}

TEST(BenchmarkTable, CsvShape) {
  BenchmarkTable t{"sphere", {}};
  double value = 0.1;
  for (int noise : kBenchmarkNoise) {
    for (int budget : kBenchmarkBudgets) {
      BenchmarkCell c;
      c.estimate.triangles = budget;
      c.estimate.noise_percent = noise;
      c.final_rms = value;
      value += 0.1;
      t.cells.push_back(c);
    }
  }
  BenchmarkCell hull;
  hull.estimate.visual_hull = true;
  hull.final_rms = 9.0;
  t.cells.push_back(hull);
  t.cells[5].final_rms.reset();
  t.cells[5].error = "boom";
  EXPECT_EQ(t.to_csv(),
            "noise_percent,250,500,1500,10000,visual_hull\n"
            "0,0.100000,0.200000,0.300000,0.400000,9.000000\n"
            "5,0.500000,NA,0.700000,0.800000,NA\n"
            "10,0.900000,1.000000,1.100000,1.200000,NA\n");
  EXPECT_EQ(t.find(1500, 5)->final_rms, t.cells[6].final_rms);
  EXPECT_EQ(t.visual_hull(), &t.cells.back());
  EXPECT_EQ(t.find(42, 0), nullptr);
}

int run_cli(const std::string& args) {
  const std::string command = std::string(MVPS_CLI_PATH) + " -q " + args + " > /dev/null 2>&1";
  const int status = std::system(command.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST_F(ExportedScene, CliExitCodes) {
  const fs::path scene_dir = config_path_.parent_path();
  EXPECT_EQ(run_cli(""), 1);
  EXPECT_EQ(run_cli("evaluate --rec " + (scene_dir / "initial.ply").string()), 1);
  EXPECT_EQ(run_cli("evaluate --rec missing.ply --gt missing.ply"), 1);
  EXPECT_EQ(run_cli("evaluate --rec " + (scene_dir / "initial.ply").string() + " --gt " +
                    (scene_dir / "ground_truth.ply").string() + " --samples 500"),
            0);
  EXPECT_EQ(run_cli("reconstruct --config " + (scene_dir / "nothing.json").string()), 1);

  // Small levels keep the runs short; two CG iterations cannot converge.
  SceneConfig c = load_config(config_path_);
  c.solver.base_level = 4;
  c.solver.max_level = 4;
  save_config(c, scene_dir / "quick.json");
  EXPECT_EQ(run_cli("reconstruct --config " + (scene_dir / "quick.json").string()), 0);
  EXPECT_TRUE(fs::exists(c.output.mesh));
  EXPECT_TRUE(read_json(c.output.report).contains("rounds"));
  c.solver.cg_max_iters = 2;
  save_config(c, scene_dir / "capped.json");
  EXPECT_EQ(run_cli("reconstruct --config " + (scene_dir / "capped.json").string() +
                    " --dump-volume " + (scene_dir / "v.sdf").string()),
            3);
  EXPECT_NO_THROW(read_volume_dump(scene_dir / "v.sdf"));
}

}  // namespace
}  // namespace mvps
