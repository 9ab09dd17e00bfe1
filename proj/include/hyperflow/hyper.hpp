#pragma once

#include <cstddef>
#include <vector>

#include "hyperflow/mlp.hpp"
#include "hyperflow/odeflow.hpp"

// Hypernetwork: a decoder from latent codes to the flat weights of a target
// flow's dynamics, and a latent flow whose base density is N(0, I).
namespace hyperflow::hyper {

struct HyperSpec {
  std::size_t latent_dim = 32;
  /// Target dynamics over [y, t]: 4 -> 32 -> 32 -> 3, tanh.
  MlpSpec target{{4, 32, 32, 3}, Activation::tanh, false};
  std::vector<std::size_t> decoder_hidden{256, 256};
  std::vector<std::size_t> prior_hidden{64, 64};

  MlpSpec decoder() const;          // D -> hidden -> P, relu
  MlpSpec prior_dynamics() const;   // [z, t] -> hidden -> D, tanh
  /// Exact trace up to kExactTraceMaxDim latent dimensions, Hutchinson above.
  TraceMode prior_trace_mode() const;
  void validate() const;

  friend bool operator==(const HyperSpec&, const HyperSpec&) = default;
};

/// Flat target-network weights with their layout.
struct FlowParams {
  Tensor flat;
  MlpSpec layout;
};

struct HyperParams {
  Tensor decoder;
  Tensor prior;
};

/// Decoder final-layer weights are scaled by `output_scale`; the final bias
/// holds a freshly initialized target network with a zero output layer, so a
/// new model emits a near-identity flow that still has useful gradients.
HyperParams init_hyper(const HyperSpec& spec, Rng& rng, double output_scale = 0.1);

/// z [1, D] -> flat weights [1, P].
Var decode_weights(const HyperSpec& spec, const Var& decoder, const Var& z);
FlowParams decode_weights(const HyperSpec& spec, const HyperParams& hp, const Tensor& z);

/// Flow config for the latent flow: `base` with the HyperSpec trace mode.
odeflow::FlowConfig latent_flow_config(const HyperSpec& spec, odeflow::FlowConfig base);

/// log P(z) under the latent flow with a standard-normal base; z is [1, D]
/// (or [N, D], giving [N, 1]).
Var prior_flow_logprob(const HyperSpec& spec, const Var& prior, const Var& z,
                       const odeflow::FlowConfig& cfg, Rng* rng = nullptr);
double prior_flow_logprob(const HyperSpec& spec, const HyperParams& hp,
                          const Tensor& z, const odeflow::FlowConfig& cfg,
                          Rng* rng = nullptr);

/// w ~ N(0, I), z = latent flow run from base to latent space, then decoded.
FlowParams sample_object(const HyperSpec& spec, const HyperParams& hp, Rng& rng,
                         const odeflow::FlowConfig& cfg);
/// The latent code sample_object would decode.
Tensor sample_latent(const HyperSpec& spec, const HyperParams& hp, Rng& rng,
                     const odeflow::FlowConfig& cfg);

}  // namespace hyperflow::hyper
