#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "hyperflow/geometry.hpp"
#include "hyperflow/train.hpp"
#include "support.hpp"

using namespace hyperflow;
using support::fixture;
using support::Json;
using support::read_file;
using support::run_cli;
using geometry::read_xyz;
namespace fs = std::filesystem;

namespace {

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

// Small enough that a CLI training run takes a few seconds.
Json tiny_config(const fs::path& data, const fs::path& run) {
  Json j = Json::parse(R"({
    "model": {"latent_dim": 4, "encoder_layers": [3, 16, 32],
              "target": {"layer_sizes": [4, 8, 3], "activation": "tanh", "activate_output": false},
              "decoder_hidden": [16], "prior_hidden": [8]},
    "train": {"epochs": 2, "batch_size": 4, "points_per_cloud": 32, "seed": 3,
              "schedule": {"sigma_start": 1.0, "sigma_end": 0.5, "n_epochs": 2},
              "flow": {"n_steps": 3}, "prior_flow": {"n_steps": 3},
              "loss_weights": {"flow": 1.0, "prior": 0.03125, "entropy": 0.03125}},
    "output": {"checkpoint_every": 1}
  })");
  j["data"]["train_dir"] = data.string();
  j["output"]["run_dir"] = run.string();
  return j;
}

fs::path write_config(const fs::path& dir, const Json& j) {
  const fs::path p = dir / "config.json";
  std::ofstream(p) << j.dump(2) << '\n';
  return p;
}

fs::path synth_data(const fs::path& dir, int clouds = 8) {
  const fs::path data = dir / "data";
  const auto r = run_cli("synth --shape sphere_shell --n-clouds " + std::to_string(clouds) +
                         " --points 64 --seed 1 --out-dir " + q(data));
  REQUIRE(r.exit_code == 0);
  return data;
}

// Decoder and prior weights zeroed: every latent decodes to the zero field.
fs::path identity_checkpoint(const fs::path& dir, double mu, double sigma) {
  train::ModelSpec spec = train::ModelSpec::with_latent_dim(4);
  spec.encoder.point_layers = {3, 8, 8};
  spec.hyper.target.layer_sizes = {4, 8, 3};
  spec.hyper.decoder_hidden = {8};
  spec.hyper.prior_hidden = {8};
  train::TrainConfig cfg;
  train::TrainState s = train::init_state(spec, cfg);
  s.hyper.decoder = Tensor::zeros_like(s.hyper.decoder);
  s.mu = mu;
  s.sigma = sigma;
  const fs::path p = dir / "identity.hflw";
  train::save_checkpoint(s, p);
  return p;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("synth writes clouds on the requested surface") {
  const fs::path dir = support::scratch_dir("cli_synth");
  const auto r = run_cli("synth --shape sphere_shell --n-clouds 3 --points 100 --seed 2 --out-dir " +
                         q(dir / "a"));
  REQUIRE(r.exit_code == 0);
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir / "a")) {
    const PointCloud c = read_xyz(e.path());
    CHECK(c.size() == 100);
    for (const Point3& p : c.points) CHECK(norm(p) == doctest::Approx(1.0).epsilon(1e-12));
    ++files;
  }
  CHECK(files == 3);
}

TEST_CASE("synth is deterministic under a seed") {
  const fs::path dir = support::scratch_dir("cli_synth_det");
  for (const char* sub : {"a", "b"}) {
    REQUIRE(run_cli("synth --shape box --n-clouds 2 --points 50 --noise 0.01 --seed 9 --out-dir " +
                    q(dir / sub)).exit_code == 0);
  }
  for (const char* f : {"box_0000.xyz", "box_0001.xyz"}) {
    CHECK(read_file(dir / "a" / f) == read_file(dir / "b" / f));
  }
}

TEST_CASE("synth noise on the torus has half-normal distance") {
  const Json& f = fixture("cli.synth_torus_half_normal");
  const fs::path dir = support::scratch_dir("cli_synth_torus");
  const auto r = run_cli("synth --shape torus --n-clouds 1 --points " + f["inputs"]["points"].dump() +
                         " --noise " + f["inputs"]["noise_sigma"].dump() + " --seed " +
                         f["inputs"]["seed"].dump() + " --out-dir " + q(dir));
  REQUIRE(r.exit_code == 0);
  fs::path file;
  for (const auto& e : fs::directory_iterator(dir)) file = e.path();
  const PointCloud c = read_xyz(file);
  REQUIRE(c.size() == f["inputs"]["points"].get<std::size_t>());
  double sum = 0.0;
  for (const Point3& p : c.points) {
    const double rho = std::hypot(p[0], p[1]) - 0.7;
    sum += std::abs(std::hypot(rho, p[2]) - 0.3);
  }
  CHECK(std::abs(sum / c.size() - f["expected"]["mean_distance"].get<double>()) <
        f["tolerance"]["absolute"].get<double>());
}

TEST_CASE("unknown shape and bad flags exit with a usage error") {
  CHECK(run_cli("synth --shape cube").exit_code == 1);
  CHECK(run_cli("synth --noise -1").exit_code == 1);
  CHECK(run_cli("frobnicate").exit_code == 1);
  CHECK(run_cli("").exit_code == 1);
}

TEST_CASE("train writes config, log and checkpoints deterministically") {
  const fs::path dir = support::scratch_dir("cli_train");
  const fs::path data = synth_data(dir);
  std::string logs[2];
  std::string ckpts[2];
  for (int i = 0; i < 2; ++i) {
    const fs::path run = dir / ("run" + std::to_string(i));
    const fs::path cfg = write_config(dir, tiny_config(data, run));
    const auto r = run_cli("train --config " + q(cfg));
    REQUIRE_MESSAGE(r.exit_code == 0, r.output);
    CHECK(fs::exists(run / "config.json"));
    CHECK(fs::exists(run / "checkpoint_epoch_0001.hflw"));
    ckpts[i] = read_file(run / "checkpoint.hflw");
    logs[i] = read_file(run / "log.jsonl");

    // Echoed config round-trips to the resolved settings.
    const Json echoed = Json::parse(read_file(run / "config.json"));
    CHECK(echoed["train"]["epochs"] == 2);
    CHECK(echoed["model"]["latent_dim"] == 4);

    std::size_t lines = 0;
    std::istringstream in(logs[i]);
    for (std::string line; std::getline(in, line); ++lines) {
      const Json e = Json::parse(line);
      CHECK(e["epoch"] == lines);
      CHECK(std::isfinite(e["cost"].get<double>()));
      CHECK(e.contains("sigma"));
    }
    CHECK(lines == 2);
  }
  CHECK(ckpts[0] == ckpts[1]);
  // Wall time differs between runs; compare the loss columns only.
  auto costs = [](const std::string& log) {
    std::vector<double> out;
    std::istringstream in(log);
    for (std::string line; std::getline(in, line);) out.push_back(Json::parse(line)["cost"]);
    return out;
  };
  CHECK(costs(logs[0]) == costs(logs[1]));
}

TEST_CASE("train flags override the config file") {
  const fs::path dir = support::scratch_dir("cli_train_flags");
  const fs::path data = synth_data(dir, 4);
  const fs::path cfg = write_config(dir, tiny_config(data, dir / "ignored"));
  const auto r = run_cli("train --config " + q(cfg) + " --epochs 1 --lr 0.002 --seed 5 --run-dir " +
                         q(dir / "run"));
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  const Json echoed = Json::parse(read_file(dir / "run" / "config.json"));
  CHECK(echoed["train"]["epochs"] == 1);
  CHECK(echoed["train"]["learning_rate"] == 0.002);
  CHECK(echoed["train"]["seed"] == 5);
  CHECK_FALSE(fs::exists(dir / "ignored"));
}

TEST_CASE("train resume continues to the same state as an uninterrupted run") {
  const fs::path dir = support::scratch_dir("cli_train_resume");
  const fs::path data = synth_data(dir);
  const fs::path cfg = write_config(dir, tiny_config(data, dir / "full"));
  REQUIRE(run_cli("train --config " + q(cfg)).exit_code == 0);
  REQUIRE(run_cli("train --config " + q(cfg) + " --epochs 1 --run-dir " + q(dir / "part")).exit_code == 0);
  const auto r = run_cli("train --config " + q(cfg) + " --run-dir " + q(dir / "resumed") +
                         " --resume " + q(dir / "part" / "checkpoint.hflw"));
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  CHECK(read_file(dir / "full" / "checkpoint.hflw") == read_file(dir / "resumed" / "checkpoint.hflw"));
}

TEST_CASE("config errors name the offending line") {
  const fs::path dir = support::scratch_dir("cli_train_bad");
  const fs::path cfg = dir / "bad.json";
  std::ofstream(cfg) << "{\n  \"train\": {\n    \"epochs\": 2,\n    \"bogus_key\": 1\n  }\n}\n";
  const auto r = run_cli("train --config " + q(cfg));
  CHECK(r.exit_code == 1);
  CHECK(r.output.find("config error") != std::string::npos);
  CHECK(r.output.find("line 4") != std::string::npos);

  std::ofstream(cfg, std::ios::trunc) << "{\n  \"train\": {\"epochs\": -3}\n}\n";
  CHECK(run_cli("train --config " + q(cfg)).exit_code == 1);

  std::ofstream(cfg, std::ios::trunc) << "{\n  \"train\": [1, 2\n";
  CHECK(run_cli("train --config " + q(cfg)).exit_code == 1);
}

TEST_CASE("missing or corrupt checkpoints are runtime errors") {
  const fs::path dir = support::scratch_dir("cli_ckpt");
  auto r = run_cli("sample --checkpoint " + q(dir / "nope.hflw") + " --out-dir " + q(dir / "s"));
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("error") != std::string::npos);
  std::ofstream(dir / "junk.hflw") << "not a checkpoint";
  r = run_cli("sample --checkpoint " + q(dir / "junk.hflw") + " --out-dir " + q(dir / "s"));
  CHECK(r.exit_code == 2);
}

TEST_CASE("sample writes the requested objects deterministically") {
  const fs::path dir = support::scratch_dir("cli_sample");
  const fs::path ckpt = identity_checkpoint(dir, 0.0, 0.3);
  for (const char* sub : {"a", "b"}) {
    const auto r = run_cli("sample --checkpoint " + q(ckpt) + " --n-objects 3 --n-points 128 --seed 4 " +
                           "--n-steps 4 --out-dir " + q(dir / sub));
    REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir / "a")) files.push_back(e.path().filename());
  REQUIRE(files.size() == 3);
  for (const fs::path& f : files) {
    CHECK(read_xyz(dir / "a" / f).size() == 128);
    CHECK(read_file(dir / "a" / f) == read_file(dir / "b" / f));
  }
}

TEST_CASE("sampling through an identity flow reproduces the SLN radii") {
  const Json& f = fixture("cli.sample_identity_ks");
  const Json& in = f["inputs"];
  const fs::path dir = support::scratch_dir("cli_sample_ks");
  const fs::path ckpt = identity_checkpoint(dir, in["mu"], in["sigma"]);
  const auto r = run_cli("sample --checkpoint " + q(ckpt) + " --n-objects 1 --n-points " +
                         in["n_points"].dump() + " --seed " + in["seed"].dump() + " --out-dir " + q(dir / "s"));
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  fs::path file;
  for (const auto& e : fs::directory_iterator(dir / "s")) file = e.path();
  const PointCloud c = read_xyz(file);
  REQUIRE(c.size() == in["n_points"].get<std::size_t>());
  std::vector<double> logr;
  for (const Point3& p : c.points) logr.push_back(std::log(norm(p)));
  const double mu = in["mu"], sigma = in["sigma"];
  const double d = oracle::ks_statistic(logr, [&](double x) { return oracle::normal_cdf((x - mu) / sigma); });
  CHECK(d < f["expected"]["ks_critical"].get<double>());
}

TEST_CASE("reconstruct writes n_out points") {
  const fs::path dir = support::scratch_dir("cli_recon");
  const fs::path ckpt = identity_checkpoint(dir, 0.0, 0.1);
  const fs::path data = synth_data(dir, 1);
  fs::path input;
  for (const auto& e : fs::directory_iterator(data)) input = e.path();
  const auto r = run_cli("reconstruct --checkpoint " + q(ckpt) + " --input " + q(input) +
                         " --n-out 300 --n-steps 4 --out " + q(dir / "rec.xyz"));
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  const PointCloud c = read_xyz(dir / "rec.xyz");
  CHECK(c.size() == 300);
  // Identity flow: radii log-normal about 1.
  double mean_log = 0.0;
  for (const Point3& p : c.points) mean_log += std::log(norm(p));
  CHECK(std::abs(mean_log / c.size()) < 0.05);

  CHECK(run_cli("reconstruct --checkpoint " + q(ckpt) + " --input " + q(dir / "none.xyz") +
                " --out " + q(dir / "x.xyz")).exit_code == 2);
}

TEST_CASE("mesh through a zero field is the sphere itself") {
  const Json& f = fixture("cli.mesh_zero_field_sphere");
  const fs::path dir = support::scratch_dir("cli_mesh");
  const fs::path ckpt = identity_checkpoint(dir, 0.0, 0.2);

  const auto r = run_cli("mesh --checkpoint " + q(ckpt) + " --sample --seed " + f["inputs"]["seed"].dump() +
                         " --subdivisions " + f["inputs"]["subdivisions"].dump() + " --radius " +
                         f["inputs"]["radius"].dump() + " --out " + q(dir / "m.obj"));
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  const geometry::TriMesh m = geometry::read_obj(dir / "m.obj");
  const geometry::TriMesh sphere = geometry::icosphere(f["inputs"]["subdivisions"]);
  REQUIRE(m.vertices.size() == sphere.vertices.size());
  CHECK(geometry::is_watertight(m));
  const double tol = f["tolerance"]["absolute"];
  const double radius = f["expected"]["radius"];
  for (std::size_t i = 0; i < m.vertices.size(); ++i) {
    CHECK(std::abs(norm(m.vertices[i]) - radius) < tol);
    for (int k = 0; k < 3; ++k) CHECK(std::abs(m.vertices[i][k] - radius * sphere.vertices[i][k]) < tol);
  }
}

TEST_CASE("mesh with masses writes one OBJ per mass") {
  const fs::path dir = support::scratch_dir("cli_mesh_family");
  const fs::path ckpt = identity_checkpoint(dir, 0.0, 0.2);
  const auto r = run_cli("mesh --checkpoint " + q(ckpt) + " --sample --subdivisions 2 --n-steps 4 " +
                         "--masses 0.2,0.4,0.6,0.8 --out " + q(dir / "fam.obj"));
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  std::vector<double> radii;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() != ".obj") continue;
    const geometry::TriMesh m = geometry::read_obj(e.path());
    CHECK(geometry::is_watertight(m));
    radii.push_back(norm(m.vertices.front()));
  }
  REQUIRE(radii.size() == 4);
  std::sort(radii.begin(), radii.end());
  CHECK(std::adjacent_find(radii.begin(), radii.end()) == radii.end());

  CHECK(run_cli("mesh --checkpoint " + q(ckpt) + " --sample --masses 0.2,1.5").exit_code == 1);
  CHECK(run_cli("mesh --checkpoint " + q(ckpt)).exit_code == 1);
  CHECK(run_cli("mesh --checkpoint " + q(ckpt) + " --sample --subdivisions 9").exit_code == 1);
}

TEST_CASE("eval of a set against itself") {
  const fs::path dir = support::scratch_dir("cli_eval_self");
  REQUIRE(run_cli("synth --shape torus --n-clouds 3 --points 32 --seed 8 --out-dir " + q(dir / "d")).exit_code == 0);
  const auto r = run_cli("eval --generated " + q(dir / "d") + " --reference " + q(dir / "d") + " --out " +
                         q(dir / "rep.json"));
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  const Json rep = Json::parse(read_file(dir / "rep.json"));
  CHECK(rep["jsd"].get<double>() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(rep["mmd_cd"] == 0.0);
  CHECK(rep["mmd_emd"] == 0.0);
  CHECK(rep["cov_cd"] == 1.0);
  CHECK(rep["cov_emd"] == 1.0);
  CHECK(rep["nn_1_zero_distance"].get<int>() > 0);
}

TEST_CASE("eval on the toy sets matches brute force") {
  const Json& f = fixture("cli.eval_toy");
  const fs::path base = support::fixture_dir();
  const auto r = run_cli("eval --generated " + q(base / f["inputs"]["generated_dir"].get<std::string>()) +
                         " --reference " + q(base / f["inputs"]["reference_dir"].get<std::string>()) +
                         " --grid " + f["inputs"]["grid"].dump());
  REQUIRE_MESSAGE(r.exit_code == 0, r.output);
  const Json rep = Json::parse(r.output.substr(r.output.find('{')));
  const double tol = f["tolerance"];
  for (const auto& [key, value] : f["expected"].items()) {
    INFO(key);
    CHECK(std::abs(rep[key].get<double>() - value.get<double>()) <= tol);
  }
}

TEST_CASE("eval errors") {
  const fs::path dir = support::scratch_dir("cli_eval_bad");
  REQUIRE(run_cli("synth --shape box --n-clouds 2 --points 16 --seed 1 --out-dir " + q(dir / "a")).exit_code == 0);
  REQUIRE(run_cli("synth --shape box --n-clouds 2 --points 20 --seed 1 --out-dir " + q(dir / "b")).exit_code == 0);
  auto r = run_cli("eval --generated " + q(dir / "a") + " --reference " + q(dir / "missing"));
  CHECK(r.exit_code == 2);
  r = run_cli("eval --generated " + q(dir / "a") + " --reference " + q(dir / "b"));
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("box_0000.xyz") != std::string::npos);
}

}  // TEST_SUITE
