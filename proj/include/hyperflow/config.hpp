#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "hyperflow/train.hpp"

// JSON forms of the model and training settings. Readers reject unknown keys
// and report the line of the offending entry.
namespace hyperflow::config {

using Json = nlohmann::ordered_json;

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& message, std::size_t line)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + message : message),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct DataConfig {
  /// Directory of XYZ training clouds.
  std::string train_dir;
  friend bool operator==(const DataConfig&, const DataConfig&) = default;
};

struct OutputConfig {
  std::string run_dir = "run";
  /// Checkpoint every k epochs (0: only at the end).
  int checkpoint_every = 0;
  friend bool operator==(const OutputConfig&, const OutputConfig&) = default;
};

struct RunConfig {
  train::ModelSpec model = train::ModelSpec::with_latent_dim(32);
  train::TrainConfig train;
  DataConfig data;
  OutputConfig output;

  void validate() const;
  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

Json to_json(const MlpSpec& s);
Json to_json(const train::ModelSpec& m);
Json to_json(const odeflow::FlowConfig& f);
Json to_json(const train::TrainConfig& t);
Json to_json(const RunConfig& r);

/// `text` is kept to map key paths back to line numbers.
train::ModelSpec model_from_json(const Json& j, const std::string& text = {});
RunConfig run_config_from_json(const Json& j, const std::string& text = {});

/// Parses and validates; syntax and schema errors become ConfigError.
RunConfig parse_run_config(const std::string& text);
RunConfig load_run_config(const std::string& path);

std::string activation_name(Activation a);
Activation parse_activation(const std::string& name);

}  // namespace hyperflow::config
