#include "hyperflow/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "hyperflow/errors.hpp"
#include "hyperflow/geometry.hpp"

namespace hyperflow::commands {

std::vector<NamedCloud> load_cloud_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw std::runtime_error("not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".xyz") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) throw std::runtime_error("no .xyz files in " + dir.string());
  std::vector<NamedCloud> out;
  out.reserve(files.size());
  for (const fs::path& f : files) out.push_back({f, geometry::read_xyz(f)});
  return out;
}

std::vector<fs::path> synth(const SynthOptions& opt) {
  std::error_code ec;
  fs::create_directories(opt.out_dir, ec);
  if (ec) throw std::runtime_error("cannot create " + opt.out_dir.string() + ": " + ec.message());
  Rng rng(opt.seed);
  std::vector<fs::path> written;
  for (std::size_t i = 0; i < opt.n_clouds; ++i) {
    char name[64];
    std::snprintf(name, sizeof name, "%s_%04zu.xyz", shapes::shape_name(opt.shape).c_str(), i);
    const fs::path path = opt.out_dir / name;
    geometry::write_xyz(shapes::sample_shape(opt.shape, opt.points_per_cloud, opt.noise_sigma, rng), path);
    written.push_back(path);
  }
  return written;
}

namespace {

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

config::Json epoch_json(const train::EpochMetrics& m) {
  return config::Json{{"epoch", m.epoch},           {"sigma", m.sigma},
                      {"next_sigma", m.next_sigma}, {"cost", m.cost},
                      {"flow", m.flow},             {"prior", m.prior},
                      {"entropy", m.entropy},       {"batches", m.batches},
                      {"skipped", m.skipped},       {"seconds", m.seconds},
                      {"warnings", m.warnings}};
}

fs::path epoch_checkpoint(const fs::path& dir, int epoch) {
  char name[64];
  std::snprintf(name, sizeof name, "checkpoint_epoch_%04d.hflw", epoch);
  return dir / name;
}

}  // namespace

train::TrainState run_training(const config::RunConfig& cfg,
                               const std::optional<fs::path>& resume, std::ostream& progress) {
  cfg.validate();
  if (cfg.data.train_dir.empty()) throw config::ConfigError("data.train_dir is required", 0);
  std::vector<PointCloud> dataset;
  for (NamedCloud& nc : load_cloud_dir(cfg.data.train_dir)) dataset.push_back(std::move(nc.cloud));

  const fs::path run_dir = cfg.output.run_dir;
  fs::create_directories(run_dir);
  write_file(run_dir / "config.json", config::to_json(cfg).dump(2) + "\n");

  train::TrainState state;
  if (resume) {
    state = train::load_checkpoint(*resume);
    if (!(state.model == cfg.model)) {
      throw std::runtime_error("checkpoint " + resume->string() + " was trained with a different model");
    }
  } else {
    state = train::init_state(cfg.model, cfg.train);
  }

  std::ofstream log(run_dir / "log.jsonl", std::ios::app);
  if (!log) throw std::runtime_error("cannot open " + (run_dir / "log.jsonl").string());
  while (state.epoch < cfg.train.epochs) {
    const train::EpochMetrics m = train::train_epoch(state, dataset, cfg.train);
    const std::string line = epoch_json(m).dump();
    log << line << '\n';
    log.flush();
    progress << line << '\n';
    const int every = cfg.output.checkpoint_every;
    if (every > 0 && state.epoch % every == 0 && state.epoch < cfg.train.epochs) {
      train::save_checkpoint(state, epoch_checkpoint(run_dir, state.epoch));
    }
  }
  train::save_checkpoint(state, run_dir / "checkpoint.hflw");
  return state;
}

odeflow::FlowConfig inference_flow(int n_steps, odeflow::Solver solver) {
  odeflow::FlowConfig f;
  f.n_steps = n_steps;
  f.solver = solver;
  f.validate();
  return f;
}

std::vector<fs::path> sample(const SampleOptions& opt) {
  const train::TrainState state = train::load_checkpoint(opt.checkpoint);
  fs::create_directories(opt.out_dir);
  Rng rng(opt.seed);
  const odeflow::FlowConfig latent = hyper::latent_flow_config(state.model.hyper, opt.flow);
  std::vector<fs::path> out;
  for (std::size_t i = 0; i < opt.n_objects; ++i) {
    const hyper::FlowParams w = hyper::sample_object(state.model.hyper, state.hyper, rng, latent);
    const PointCloud pts = train::generate_points(w, state.sln(), opt.n_points, rng, opt.flow);
    char name[64];
    std::snprintf(name, sizeof name, "object_%04zu.xyz", i);
    geometry::write_xyz(pts, opt.out_dir / name);
    out.push_back(opt.out_dir / name);
  }
  return out;
}

PointCloud reconstruct(const ReconstructOptions& opt) {
  const train::TrainState state = train::load_checkpoint(opt.checkpoint);
  const PointCloud input = geometry::read_xyz(opt.input);
  Rng rng(opt.seed);
  const PointCloud out = train::reconstruct(state, input, opt.n_out, rng, opt.flow);
  geometry::write_xyz(out, opt.output);
  return out;
}

fs::path family_path(const fs::path& base, double mass) {
  char suffix[32];
  std::snprintf(suffix, sizeof suffix, "_m%02d", static_cast<int>(std::lround(mass * 100.0)));
  fs::path p = base;
  p.replace_filename(base.stem().string() + suffix + base.extension().string());
  return p;
}

MeshOutput mesh(const MeshOptions& opt) {
  const train::TrainState state = train::load_checkpoint(opt.checkpoint);
  hyper::FlowParams w;
  if (opt.input) {
    w = train::reconstruct_weights(state, geometry::read_xyz(*opt.input));
  } else {
    Rng rng(opt.seed);
    w = hyper::sample_object(state.model.hyper, state.hyper, rng,
                             hyper::latent_flow_config(state.model.hyper, opt.flow));
  }
  if (opt.output.has_parent_path()) fs::create_directories(opt.output.parent_path());
  MeshOutput out;
  if (opt.masses.empty()) {
    const geometry::TriangulationResult r =
        geometry::triangulate_object(w, geometry::icosphere(opt.subdivisions, opt.radius), opt.flow);
    geometry::write_obj(r.mesh, opt.output);
    out.files.push_back(opt.output);
    out.warnings = r.warnings;
    return out;
  }
  const auto family = geometry::surface_family(w, opt.subdivisions, opt.masses, state.sln(), opt.flow);
  for (std::size_t i = 0; i < family.size(); ++i) {
    const fs::path p = family_path(opt.output, opt.masses[i]);
    geometry::write_obj(family[i].mesh, p);
    out.files.push_back(p);
    out.warnings.insert(out.warnings.end(), family[i].warnings.begin(), family[i].warnings.end());
  }
  return out;
}

config::Json report_json(const metrics::MetricReport& r) {
  return config::Json{{"jsd", r.jsd},
                      {"mmd_cd", r.mmd_cd},
                      {"mmd_emd", r.mmd_emd},
                      {"cov_cd", r.cov_cd},
                      {"cov_emd", r.cov_emd},
                      {"nn_1", r.nn_1},
                      {"nn_1_emd", r.nn_1_emd},
                      {"nn_1_ties", r.nn_1_ties},
                      {"nn_1_zero_distance", r.nn_1_zero_distance}};
}

metrics::MetricReport evaluate(const EvalOptions& opt) {
  const std::vector<NamedCloud> gen = load_cloud_dir(opt.generated_dir);
  const std::vector<NamedCloud> ref = load_cloud_dir(opt.reference_dir);
  const std::size_t n = ref.front().cloud.size();
  for (const auto* set : {&gen, &ref}) {
    for (const NamedCloud& nc : *set) {
      if (nc.cloud.size() != n) {
        throw std::runtime_error(nc.path.string() + " has " + std::to_string(nc.cloud.size()) +
                                 " points; EMD-based metrics need " + std::to_string(n) +
                                 " (as in " + ref.front().path.string() + ")");
      }
    }
  }
  metrics::CloudSet g, r;
  for (const NamedCloud& nc : gen) g.push_back(nc.cloud);
  for (const NamedCloud& nc : ref) r.push_back(nc.cloud);
  const metrics::MetricReport rep = metrics::evaluate(g, r, opt.grid);
  if (opt.output) {
    if (opt.output->has_parent_path()) fs::create_directories(opt.output->parent_path());
    write_file(*opt.output, report_json(rep).dump(2) + "\n");
  }
  return rep;
}

std::vector<double> parse_masses(const std::string& text) {
  std::vector<double> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &used);
    } catch (const std::exception&) {
      throw std::invalid_argument("bad mass '" + item + "'");
    }
    if (item.find_first_not_of(" \t", used) != std::string::npos) {
      throw std::invalid_argument("bad mass '" + item + "'");
    }
    if (!(v > 0.0 && v < 1.0)) throw std::invalid_argument("mass " + item + " outside (0, 1)");
    out.push_back(v);
  }
  if (out.empty()) throw std::invalid_argument("empty mass list");
  return out;
}

}  // namespace hyperflow::commands
