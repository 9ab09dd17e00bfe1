#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hyperflow/ops.hpp"
#include "hyperflow/rng.hpp"
#include "hyperflow/tensor.hpp"

namespace hyperflow {

/// Shape of a fully connected network whose weights live outside it.
///
/// Flat weight layout, layer by layer: W (out x in, row-major) then b (out).
/// The activation is applied after every hidden layer, and after the last
/// layer only when `activate_output` is set.
struct MlpSpec {
  std::vector<std::size_t> layer_sizes;
  Activation activation = Activation::tanh;
  bool activate_output = false;

  std::size_t parameter_count() const;
  std::size_t input_dim() const { return layer_sizes.front(); }
  std::size_t output_dim() const { return layer_sizes.back(); }
  std::size_t layer_count() const { return layer_sizes.size() - 1; }
  std::size_t weight_offset(std::size_t layer) const;
  std::size_t bias_offset(std::size_t layer) const;
  bool activated(std::size_t layer) const;
  /// Throws std::invalid_argument unless there are at least two positive
  /// layer sizes.
  void validate() const;

  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

enum class TraceMode { exact, hutchinson };

/// Largest state dimension for which exact traces are taken by default.
inline constexpr std::size_t kExactTraceMaxDim = 8;

Var forward_mlp(const MlpSpec& spec, const Var& weights, const Var& input);
Tensor forward_mlp(const MlpSpec& spec, const Tensor& weights,
                   const Tensor& input);

struct MlpWithTrace {
  Var output;  // [N, out]
  Var trace;   // [N, 1]
};

/// Evaluates the network together with, per row, the trace of the Jacobian of
/// the output with respect to the first `state_dim` input columns.
///
/// Tangents are pushed forward through the layers with differentiable ops, so
/// the trace itself can be differentiated with respect to weights and inputs.
/// Exact mode propagates `state_dim` basis tangents; Hutchinson mode
/// propagates the rows of `probes` ([N, state_dim]) and returns
/// probe^T J probe.
MlpWithTrace forward_mlp_with_trace(const MlpSpec& spec, const Var& weights,
                                    const Var& input, std::size_t state_dim,
                                    TraceMode mode,
                                    const Tensor* probes = nullptr);

/// Trace of d f / d y for dynamics f(y, t) given as an MLP over [y, t] (or
/// over y alone when the input width equals y's dimension). Hutchinson mode
/// draws one Rademacher probe from `rng`.
double jacobian_trace(const MlpSpec& spec, const Tensor& weights,
                      std::span<const double> y, double t,
                      TraceMode mode = TraceMode::exact, Rng* rng = nullptr);

/// Xavier-normal weights (He-normal for relu), zero biases; the last layer's
/// weights are multiplied by `final_scale`.
Tensor init_mlp_weights(const MlpSpec& spec, Rng& rng, double final_scale = 1.0);

}  // namespace hyperflow
