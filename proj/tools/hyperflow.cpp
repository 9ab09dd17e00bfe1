// hyperflow: synthesize shapes, train, sample, reconstruct, mesh, evaluate.
#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "hyperflow/commands.hpp"
#include "hyperflow/errors.hpp"

namespace fs = std::filesystem;
using namespace hyperflow;

namespace {

constexpr int kUsageError = 1;
constexpr int kRuntimeError = 2;

struct FlowFlags {
  int n_steps = 20;
  std::string solver = "rk4_fixed";

  void add(CLI::App* cmd) {
    cmd->add_option("--n-steps", n_steps, "Solver steps (fixed) or initial step count")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    cmd->add_option("--solver", solver, "rk4_fixed or dopri5_adaptive")
        ->check(CLI::IsMember({"rk4_fixed", "dopri5_adaptive"}))
        ->capture_default_str();
  }
  odeflow::FlowConfig config() const {
    return commands::inference_flow(
        n_steps, solver == "rk4_fixed" ? odeflow::Solver::rk4_fixed : odeflow::Solver::dopri5_adaptive);
  }
};

void print_json(const config::Json& j) { std::cout << j.dump() << std::endl; }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HyperFlow point-cloud flows"};
  app.require_subcommand(1);

  // synth
  commands::SynthOptions synth;
  std::string shape = "sphere_shell";
  auto* c_synth = app.add_subcommand("synth", "Write synthetic XYZ clouds of an analytic shape");
  c_synth->add_option("--shape", shape, "sphere_shell, torus, box or two_spheres")
      ->check(CLI::IsMember({"sphere_shell", "torus", "box", "two_spheres"}))
      ->capture_default_str();
  c_synth->add_option("--n-clouds", synth.n_clouds, "Number of clouds")->capture_default_str();
  c_synth->add_option("--points", synth.points_per_cloud, "Points per cloud")->capture_default_str();
  c_synth->add_option("--noise", synth.noise_sigma, "Isotropic Gaussian noise scale")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  c_synth->add_option("--seed", synth.seed, "RNG seed")->capture_default_str();
  c_synth->add_option("--out-dir", synth.out_dir, "Output directory")->capture_default_str();

  // train
  std::string config_path;
  std::optional<int> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<double> lr;
  std::optional<std::uint64_t> train_seed;
  std::optional<std::string> train_dir, run_dir, resume;
  auto* c_train = app.add_subcommand("train", "Train from a JSON config (flags override it)");
  c_train->add_option("--config", config_path, "JSON run config")->check(CLI::ExistingFile);
  c_train->add_option("--epochs", epochs, "Override train.epochs");
  c_train->add_option("--batch-size", batch_size, "Override train.batch_size");
  c_train->add_option("--lr", lr, "Override train.learning_rate");
  c_train->add_option("--seed", train_seed, "Override train.seed");
  c_train->add_option("--train-dir", train_dir, "Override data.train_dir");
  c_train->add_option("--run-dir", run_dir, "Override output.run_dir");
  c_train->add_option("--resume", resume, "Continue from this checkpoint");

  // sample
  commands::SampleOptions sample;
  FlowFlags sample_flow;
  auto* c_sample = app.add_subcommand("sample", "Generate novel objects as XYZ clouds");
  c_sample->add_option("--checkpoint", sample.checkpoint, "HFLW checkpoint")->required();
  c_sample->add_option("--n-objects", sample.n_objects, "Objects to draw")->capture_default_str();
  c_sample->add_option("--n-points", sample.n_points, "Points per object")->capture_default_str();
  c_sample->add_option("--seed", sample.seed, "RNG seed")->capture_default_str();
  c_sample->add_option("--out-dir", sample.out_dir, "Output directory")->capture_default_str();
  sample_flow.add(c_sample);

  // reconstruct
  commands::ReconstructOptions recon;
  FlowFlags recon_flow;
  auto* c_recon = app.add_subcommand("reconstruct", "Reconstruct an input cloud through the model");
  c_recon->add_option("--checkpoint", recon.checkpoint, "HFLW checkpoint")->required();
  c_recon->add_option("--input", recon.input, "Input XYZ cloud")->required();
  c_recon->add_option("--n-out", recon.n_out, "Output points")->capture_default_str();
  c_recon->add_option("--seed", recon.seed, "RNG seed")->capture_default_str();
  c_recon->add_option("--out", recon.output, "Output XYZ file")->capture_default_str();
  recon_flow.add(c_recon);

  // mesh
  commands::MeshOptions mesh;
  FlowFlags mesh_flow;
  std::string input_cloud, masses;
  bool from_sample = false;
  auto* c_mesh = app.add_subcommand("mesh", "Triangulate a reconstructed or sampled object to OBJ");
  c_mesh->add_option("--checkpoint", mesh.checkpoint, "HFLW checkpoint")->required();
  auto* o_input = c_mesh->add_option("--input", input_cloud, "Reconstruct this XYZ cloud");
  auto* o_sample = c_mesh->add_flag("--sample", from_sample, "Draw a novel object instead");
  o_input->excludes(o_sample);
  c_mesh->add_option("--seed", mesh.seed, "RNG seed for --sample")->capture_default_str();
  c_mesh->add_option("--subdivisions", mesh.subdivisions, "Icosphere subdivisions (0-6)")
      ->check(CLI::Range(0, 6))
      ->capture_default_str();
  c_mesh->add_option("--radius", mesh.radius, "Sphere radius without --masses")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  c_mesh->add_option("--masses", masses, "Comma-separated SLN masses, e.g. 0.2,0.4,0.6,0.8");
  c_mesh->add_option("--out", mesh.output, "Output OBJ (suffixed per mass)")->capture_default_str();
  mesh_flow.add(c_mesh);

  // eval
  commands::EvalOptions eval;
  std::string eval_out;
  auto* c_eval = app.add_subcommand("eval", "Compare generated and reference cloud directories");
  c_eval->add_option("--generated", eval.generated_dir, "Directory of generated XYZ")->required();
  c_eval->add_option("--reference", eval.reference_dir, "Directory of reference XYZ")->required();
  c_eval->add_option("--out", eval_out, "Write the report JSON here");
  c_eval->add_option("--grid", eval.grid, "JSD grid resolution")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kUsageError;
  }

  try {
    if (c_synth->parsed()) {
      synth.shape = shapes::parse_shape(shape);
      const auto files = commands::synth(synth);
      print_json({{"command", "synth"}, {"files", files.size()}, {"out_dir", synth.out_dir.string()}});
    } else if (c_train->parsed()) {
      config::RunConfig cfg = config_path.empty() ? config::RunConfig{} : config::load_run_config(config_path);
      if (epochs) cfg.train.epochs = *epochs;
      if (batch_size) cfg.train.batch_size = *batch_size;
      if (lr) cfg.train.learning_rate = *lr;
      if (train_seed) cfg.train.seed = *train_seed;
      if (train_dir) cfg.data.train_dir = *train_dir;
      if (run_dir) cfg.output.run_dir = *run_dir;
      try {
        cfg.validate();
      } catch (const std::invalid_argument& e) {
        throw config::ConfigError(e.what(), 0);
      }
      std::optional<fs::path> from;
      if (resume) from = *resume;
      const train::TrainState s = commands::run_training(cfg, from, std::cout);
      print_json({{"command", "train"},
                  {"epochs", s.epoch},
                  {"sigma", s.sigma},
                  {"checkpoint", (fs::path(cfg.output.run_dir) / "checkpoint.hflw").string()}});
    } else if (c_sample->parsed()) {
      sample.flow = sample_flow.config();
      const auto files = commands::sample(sample);
      print_json({{"command", "sample"}, {"files", files.size()}, {"out_dir", sample.out_dir.string()}});
    } else if (c_recon->parsed()) {
      recon.flow = recon_flow.config();
      const PointCloud out = commands::reconstruct(recon);
      print_json({{"command", "reconstruct"}, {"points", out.size()}, {"out", recon.output.string()}});
    } else if (c_mesh->parsed()) {
      if (input_cloud.empty() && !from_sample) {
        throw config::ConfigError("mesh needs --input <cloud.xyz> or --sample", 0);
      }
      if (!input_cloud.empty()) mesh.input = fs::path(input_cloud);
      if (!masses.empty()) {
        try {
          mesh.masses = commands::parse_masses(masses);
        } catch (const std::invalid_argument& e) {
          throw config::ConfigError(e.what(), 0);
        }
      }
      mesh.flow = mesh_flow.config();
      const commands::MeshOutput out = commands::mesh(mesh);
      for (const std::string& w : out.warnings) std::cerr << "warning: " << w << '\n';
      std::vector<std::string> names;
      for (const auto& f : out.files) names.push_back(f.string());
      print_json({{"command", "mesh"}, {"files", names}, {"warnings", out.warnings.size()}});
    } else if (c_eval->parsed()) {
      if (!eval_out.empty()) eval.output = fs::path(eval_out);
      const metrics::MetricReport rep = commands::evaluate(eval);
      print_json(commands::report_json(rep));
    }
  } catch (const config::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return 0;
}
