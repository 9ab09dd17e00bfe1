#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hyperflow/encoder.hpp"
#include "hyperflow/hyper.hpp"
#include "hyperflow/odeflow.hpp"
#include "hyperflow/point_cloud.hpp"
#include "hyperflow/sln.hpp"

namespace hyperflow::train {

struct ModelSpec {
  encoder::EncoderSpec encoder;
  hyper::HyperSpec hyper;

  /// Sets the latent width of both halves.
  static ModelSpec with_latent_dim(std::size_t d);
  void validate() const;
  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct LossWeights {
  double flow = 1.0;
  double prior = 1.0;
  double entropy = 1.0;
  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

struct TrainConfig {
  int epochs = 30;
  std::size_t batch_size = 8;
  std::size_t points_per_cloud = 256;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  sln::SigmaSchedule schedule{1.0, 0.001, 30};
  double sln_mu = 0.0;
  /// Start from the Gaussian-matched SLN parameters instead of
  /// (sln_mu, schedule.sigma_start).
  bool warm_start = false;
  odeflow::FlowConfig flow;
  odeflow::FlowConfig prior_flow;
  LossWeights weights;

  void validate() const;
  /// mu used for the whole run.
  double mu() const;
  /// Schedule actually followed (warm start replaces its start value).
  sln::SigmaSchedule effective_schedule() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct AdamMoments {
  Tensor m;
  Tensor v;
  friend bool operator==(const AdamMoments&, const AdamMoments&) = default;
};

struct TrainState {
  ModelSpec model;
  Tensor encoder;
  hyper::HyperParams hyper;
  AdamMoments encoder_opt;
  AdamMoments decoder_opt;
  AdamMoments prior_opt;
  std::uint64_t step = 0;
  int epoch = 0;
  double mu = 0.0;
  double sigma = 1.0;
  Rng rng;

  sln::SlnParams sln() const { return {mu, sigma, 3}; }
};

bool operator==(const TrainState& a, const TrainState& b);

TrainState init_state(const ModelSpec& model, const TrainConfig& cfg);

/// Differentiable handles to the three parameter groups on one tape.
struct ParamVars {
  Var encoder;
  Var decoder;
  Var prior;
};

struct CostTerms {
  Var total;
  Var flow;     // negative mean point log-likelihood under the target flow
  Var prior;    // -log P(z) under the latent flow
  Var entropy;  // posterior entropy (subtracted)
};

/// encode -> reparameterized z -> decoded target flow; the minimized cost is
///   w_f * flow + w_p * prior - w_e * entropy.
/// `eps` fixes the reparameterization noise; otherwise it is drawn from rng,
/// as are Hutchinson probes.
CostTerms hyperflow_cost(const ModelSpec& model, const ParamVars& params,
                         const PointCloud& cloud, const sln::SlnParams& sln,
                         const TrainConfig& cfg, Rng& rng,
                         const Tensor* eps = nullptr);

struct CostValues {
  double total = 0.0;
  double flow = 0.0;
  double prior = 0.0;
  double entropy = 0.0;
};

CostValues evaluate_cost(const TrainState& state, const PointCloud& cloud,
                         const TrainConfig& cfg, Rng& rng,
                         const Tensor* eps = nullptr);

struct Gradients {
  Tensor encoder;
  Tensor decoder;
  Tensor prior;
};

/// Cost and gradient with respect to every parameter group.
CostValues cost_and_gradient(const TrainState& state, const PointCloud& cloud,
                             const TrainConfig& cfg, Rng& rng, Gradients& grad,
                             const Tensor* eps = nullptr);

/// One bias-corrected Adam update; `step` is the 1-based update count.
void adam_update(Tensor& param, AdamMoments& opt, const Tensor& grad,
                 std::uint64_t step, const TrainConfig& cfg);

struct EpochMetrics {
  int epoch = 0;        // index of the epoch just trained
  double sigma = 0.0;   // sigma used during the epoch
  double next_sigma = 0.0;
  double cost = 0.0;
  double flow = 0.0;
  double prior = 0.0;
  double entropy = 0.0;
  std::size_t batches = 0;
  std::size_t skipped = 0;
  double seconds = 0.0;
  std::vector<std::string> warnings;
};

/// One shuffled pass over `dataset`; batches whose cost or gradient fails are
/// skipped and reported. Advances epoch and sigma at the end.
EpochMetrics train_epoch(TrainState& state, const std::vector<PointCloud>& dataset,
                         const TrainConfig& cfg);

/// Posterior-mean latent of `cloud` (as [D]).
Tensor encode_mean(const TrainState& state, const PointCloud& cloud);

/// Flow weights for the posterior mean of `cloud`.
hyper::FlowParams reconstruct_weights(const TrainState& state, const PointCloud& cloud);

/// n_out SLN samples at the state's (mu, sigma) pushed through the flow
/// decoded from the posterior mean of `cloud`.
PointCloud reconstruct(const TrainState& state, const PointCloud& cloud,
                       std::size_t n_out, Rng& rng, const odeflow::FlowConfig& flow);

/// Pushes SLN samples through the given target weights.
PointCloud generate_points(const hyper::FlowParams& weights, const sln::SlnParams& sln,
                           std::size_t n, Rng& rng, const odeflow::FlowConfig& flow);

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// "HFLW", u32 version, u32 manifest length, JSON manifest, raw little-endian
/// payloads. Writes through a temporary file then renames.
void save_checkpoint(const TrainState& state, const std::filesystem::path& path);
/// Throws CheckpointError on a bad magic, unknown version or truncation.
TrainState load_checkpoint(const std::filesystem::path& path);

}  // namespace hyperflow::train
