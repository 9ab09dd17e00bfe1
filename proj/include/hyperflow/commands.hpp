#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hyperflow/config.hpp"
#include "hyperflow/metrics.hpp"
#include "hyperflow/shapes.hpp"
#include "hyperflow/train.hpp"

// Command implementations behind the hyperflow executable.
namespace hyperflow::commands {

namespace fs = std::filesystem;

struct NamedCloud {
  fs::path path;
  PointCloud cloud;
};

/// Every *.xyz file in `dir`, sorted by file name.
std::vector<NamedCloud> load_cloud_dir(const fs::path& dir);

struct SynthOptions {
  shapes::Shape shape = shapes::Shape::sphere_shell;
  std::size_t n_clouds = 64;
  std::size_t points_per_cloud = 256;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  fs::path out_dir = "data";
};

/// Writes <shape>_<index>.xyz files; returns their paths.
std::vector<fs::path> synth(const SynthOptions& opt);

/// Trains (or resumes) per the config; writes config.json, log.jsonl and
/// checkpoints into config.output.run_dir. Progress lines go to `progress`.
train::TrainState run_training(const config::RunConfig& cfg,
                               const std::optional<fs::path>& resume,
                               std::ostream& progress);

/// Inference-time flow settings.
odeflow::FlowConfig inference_flow(int n_steps, odeflow::Solver solver);

struct SampleOptions {
  fs::path checkpoint;
  std::size_t n_objects = 1;
  std::size_t n_points = 2048;
  std::uint64_t seed = 0;
  fs::path out_dir = "samples";
  odeflow::FlowConfig flow;
};
std::vector<fs::path> sample(const SampleOptions& opt);

struct ReconstructOptions {
  fs::path checkpoint;
  fs::path input;
  std::size_t n_out = 2048;
  std::uint64_t seed = 0;
  fs::path output = "reconstruction.xyz";
  odeflow::FlowConfig flow;
};
PointCloud reconstruct(const ReconstructOptions& opt);

struct MeshOptions {
  fs::path checkpoint;
  std::optional<fs::path> input;  // reconstruct this cloud, else sample
  std::uint64_t seed = 0;
  int subdivisions = 3;
  double radius = 1.0;
  /// Empty: one mesh from the sphere of `radius`; otherwise one per mass.
  std::vector<double> masses;
  fs::path output = "mesh.obj";
  odeflow::FlowConfig flow;
};

struct MeshOutput {
  std::vector<fs::path> files;
  std::vector<std::string> warnings;
};
MeshOutput mesh(const MeshOptions& opt);

/// Family member file: "<stem>_m<percent><ext>" beside `base`.
fs::path family_path(const fs::path& base, double mass);

struct EvalOptions {
  fs::path generated_dir;
  fs::path reference_dir;
  std::optional<fs::path> output;
  int grid = 28;
};
config::Json report_json(const metrics::MetricReport& r);
metrics::MetricReport evaluate(const EvalOptions& opt);

/// Parses "0.2,0.4" style lists.
std::vector<double> parse_masses(const std::string& text);

}  // namespace hyperflow::commands
