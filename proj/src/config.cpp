#include "hyperflow/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>
#include <vector>

namespace hyperflow::config {

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::tanh:
      return "tanh";
    case Activation::softplus:
      return "softplus";
    case Activation::relu:
      return "relu";
  }
  return "?";
}

Activation parse_activation(const std::string& name) {
  if (name == "tanh") return Activation::tanh;
  if (name == "softplus") return Activation::softplus;
  if (name == "relu") return Activation::relu;
  throw std::invalid_argument("unknown activation '" + name + "'");
}

namespace {

std::string solver_name(odeflow::Solver s) {
  return s == odeflow::Solver::rk4_fixed ? "rk4_fixed" : "dopri5_adaptive";
}

std::string trace_name(TraceMode m) { return m == TraceMode::exact ? "exact" : "hutchinson"; }

std::size_t line_at(const std::string& text, std::size_t pos) {
  return 1 + static_cast<std::size_t>(
                 std::count(text.begin(), text.begin() + std::min(pos, text.size()), '\n'));
}

// Line of the entry at `path`, found by following the quoted keys in order.
std::size_t line_of(const std::string& text, const std::vector<std::string>& path) {
  if (text.empty() || path.empty()) return 0;
  std::size_t pos = 0;
  for (const std::string& key : path) {
    const std::string quoted = "\"" + key + "\"";
    std::size_t found = pos;
    while (true) {
      found = text.find(quoted, found);
      if (found == std::string::npos) return 0;
      std::size_t after = found + quoted.size();
      while (after < text.size() && std::isspace(static_cast<unsigned char>(text[after]))) ++after;
      if (after < text.size() && text[after] == ':') break;
      found += quoted.size();
    }
    pos = found + quoted.size();
  }
  return line_at(text, pos);
}

std::string join(const std::vector<std::string>& path) {
  std::string out;
  for (const std::string& p : path) out += (out.empty() ? "" : ".") + p;
  return out;
}

// Walks one JSON object, tracking which keys were consumed.
class Reader {
 public:
  Reader(const Json& j, std::vector<std::string> path, const std::string& text)
      : j_(j), path_(std::move(path)), text_(text) {
    if (!j_.is_object()) fail("expected an object", path_);
  }

  bool has(const std::string& key) const { return j_.contains(key); }

  template <class T>
  void get(const std::string& key, T& out) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      fail("wrong type for '" + key + "'", child_path(key));
    }
  }

  Reader child(const std::string& key) {
    used_.insert(key);
    return Reader(j_.at(key), child_path(key), text_);
  }

  template <class F>
  void convert(const std::string& key, F parse) {
    used_.insert(key);
    if (!j_.contains(key)) return;
    try {
      parse(j_.at(key));
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      fail(std::string(e.what()) + " at '" + key + "'", child_path(key));
    }
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!used_.count(key)) fail("unknown key '" + join(child_path(key)) + "'", child_path(key));
    }
  }

  [[noreturn]] void fail(const std::string& message, const std::vector<std::string>& at) const {
    throw ConfigError(message, line_of(text_, at));
  }

  std::vector<std::string> child_path(const std::string& key) const {
    std::vector<std::string> p = path_;
    p.push_back(key);
    return p;
  }

 private:
  const Json& j_;
  std::vector<std::string> path_;
  const std::string& text_;
  std::set<std::string> used_;
};

void read_mlp(Reader r, MlpSpec& s) {
  r.get("layer_sizes", s.layer_sizes);
  r.convert("activation", [&](const Json& v) { s.activation = parse_activation(v.get<std::string>()); });
  r.get("activate_output", s.activate_output);
  r.finish();
}

void read_flow(Reader r, odeflow::FlowConfig& f) {
  r.get("t0", f.t0);
  r.get("t1", f.t1);
  r.convert("solver", [&](const Json& v) {
    const std::string name = v.get<std::string>();
    if (name == "rk4_fixed") {
      f.solver = odeflow::Solver::rk4_fixed;
    } else if (name == "dopri5_adaptive") {
      f.solver = odeflow::Solver::dopri5_adaptive;
    } else {
      throw std::invalid_argument("unknown solver '" + name + "'");
    }
  });
  r.get("n_steps", f.n_steps);
  r.get("rtol", f.rtol);
  r.get("atol", f.atol);
  r.convert("trace_mode", [&](const Json& v) {
    const std::string name = v.get<std::string>();
    if (name == "exact") {
      f.trace_mode = TraceMode::exact;
    } else if (name == "hutchinson") {
      f.trace_mode = TraceMode::hutchinson;
    } else {
      throw std::invalid_argument("unknown trace mode '" + name + "'");
    }
  });
  r.get("max_steps", f.max_steps);
  r.finish();
}

void read_model(Reader r, train::ModelSpec& m) {
  std::size_t latent = m.encoder.latent_dim;
  r.get("latent_dim", latent);
  m.encoder.latent_dim = latent;
  m.hyper.latent_dim = latent;
  r.get("encoder_layers", m.encoder.point_layers);
  if (r.has("target")) read_mlp(r.child("target"), m.hyper.target);
  r.get("decoder_hidden", m.hyper.decoder_hidden);
  r.get("prior_hidden", m.hyper.prior_hidden);
  r.finish();
}

void read_train(Reader r, train::TrainConfig& t) {
  r.get("epochs", t.epochs);
  r.get("batch_size", t.batch_size);
  r.get("points_per_cloud", t.points_per_cloud);
  r.get("learning_rate", t.learning_rate);
  r.get("beta1", t.beta1);
  r.get("beta2", t.beta2);
  r.get("adam_eps", t.adam_eps);
  r.get("seed", t.seed);
  if (r.has("schedule")) {
    Reader s = r.child("schedule");
    s.get("sigma_start", t.schedule.sigma_start);
    s.get("sigma_end", t.schedule.sigma_end);
    s.get("n_epochs", t.schedule.n_epochs);
    s.finish();
  }
  r.get("sln_mu", t.sln_mu);
  r.get("warm_start", t.warm_start);
  if (r.has("flow")) read_flow(r.child("flow"), t.flow);
  if (r.has("prior_flow")) read_flow(r.child("prior_flow"), t.prior_flow);
  if (r.has("loss_weights")) {
    Reader w = r.child("loss_weights");
    w.get("flow", t.weights.flow);
    w.get("prior", t.weights.prior);
    w.get("entropy", t.weights.entropy);
    w.finish();
  }
  r.finish();
}

}  // namespace

Json to_json(const MlpSpec& s) {
  return Json{{"layer_sizes", s.layer_sizes},
              {"activation", activation_name(s.activation)},
              {"activate_output", s.activate_output}};
}

Json to_json(const train::ModelSpec& m) {
  return Json{{"latent_dim", m.encoder.latent_dim},
              {"encoder_layers", m.encoder.point_layers},
              {"target", to_json(m.hyper.target)},
              {"decoder_hidden", m.hyper.decoder_hidden},
              {"prior_hidden", m.hyper.prior_hidden}};
}

Json to_json(const odeflow::FlowConfig& f) {
  return Json{{"t0", f.t0},
              {"t1", f.t1},
              {"solver", solver_name(f.solver)},
              {"n_steps", f.n_steps},
              {"rtol", f.rtol},
              {"atol", f.atol},
              {"trace_mode", trace_name(f.trace_mode)},
              {"max_steps", f.max_steps}};
}

Json to_json(const train::TrainConfig& t) {
  return Json{{"epochs", t.epochs},
              {"batch_size", t.batch_size},
              {"points_per_cloud", t.points_per_cloud},
              {"learning_rate", t.learning_rate},
              {"beta1", t.beta1},
              {"beta2", t.beta2},
              {"adam_eps", t.adam_eps},
              {"seed", t.seed},
              {"schedule",
               Json{{"sigma_start", t.schedule.sigma_start},
                    {"sigma_end", t.schedule.sigma_end},
                    {"n_epochs", t.schedule.n_epochs}}},
              {"sln_mu", t.sln_mu},
              {"warm_start", t.warm_start},
              {"flow", to_json(t.flow)},
              {"prior_flow", to_json(t.prior_flow)},
              {"loss_weights",
               Json{{"flow", t.weights.flow},
                    {"prior", t.weights.prior},
                    {"entropy", t.weights.entropy}}}};
}

Json to_json(const RunConfig& r) {
  return Json{{"model", to_json(r.model)},
              {"train", to_json(r.train)},
              {"data", Json{{"train_dir", r.data.train_dir}}},
              {"output",
               Json{{"run_dir", r.output.run_dir},
                    {"checkpoint_every", r.output.checkpoint_every}}}};
}

train::ModelSpec model_from_json(const Json& j, const std::string& text) {
  train::ModelSpec m = train::ModelSpec::with_latent_dim(32);
  read_model(Reader(j, {}, text), m);
  return m;
}

RunConfig run_config_from_json(const Json& j, const std::string& text) {
  RunConfig rc;
  Reader r(j, {}, text);
  if (r.has("model")) read_model(r.child("model"), rc.model);
  if (r.has("train")) read_train(r.child("train"), rc.train);
  if (r.has("data")) {
    Reader d = r.child("data");
    d.get("train_dir", rc.data.train_dir);
    d.finish();
  }
  if (r.has("output")) {
    Reader o = r.child("output");
    o.get("run_dir", rc.output.run_dir);
    o.get("checkpoint_every", rc.output.checkpoint_every);
    o.finish();
  }
  r.finish();
  return rc;
}

void RunConfig::validate() const {
  model.validate();
  train.validate();
  if (output.checkpoint_every < 0) {
    throw std::invalid_argument("checkpoint_every must be >= 0");
  }
}

RunConfig parse_run_config(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("malformed JSON: ") + e.what(), line_at(text, e.byte ? e.byte - 1 : 0));
  }
  RunConfig rc = run_config_from_json(j, text);
  try {
    rc.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what(), 0);
  }
  return rc;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path, 0);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str());
}

}  // namespace hyperflow::config
