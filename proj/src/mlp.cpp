#include "hyperflow/mlp.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace hyperflow {

std::size_t MlpSpec::parameter_count() const {
  std::size_t count = 0;
  for (std::size_t i = 0; i + 1 < layer_sizes.size(); ++i) {
    count += (layer_sizes[i] + 1) * layer_sizes[i + 1];
  }
  return count;
}

std::size_t MlpSpec::weight_offset(std::size_t layer) const {
  std::size_t offset = 0;
  for (std::size_t i = 0; i < layer; ++i) {
    offset += (layer_sizes[i] + 1) * layer_sizes[i + 1];
  }
  return offset;
}

std::size_t MlpSpec::bias_offset(std::size_t layer) const {
  return weight_offset(layer) + layer_sizes[layer] * layer_sizes[layer + 1];
}

bool MlpSpec::activated(std::size_t layer) const {
  return layer + 1 < layer_count() || activate_output;
}

void MlpSpec::validate() const {
  if (layer_sizes.size() < 2) {
    throw std::invalid_argument("MLP needs at least two layer sizes");
  }
  for (std::size_t s : layer_sizes) {
    if (s == 0) throw std::invalid_argument("MLP layer of width zero");
  }
}

namespace {

void check_shapes(const MlpSpec& spec, const Tensor& weights,
                  const Tensor& input) {
  spec.validate();
  if (weights.size() != spec.parameter_count()) {
    throw std::invalid_argument(
        "MLP expects " + std::to_string(spec.parameter_count()) +
        " weights, got " + std::to_string(weights.size()));
  }
  if (input.cols() != spec.input_dim()) {
    throw std::invalid_argument("MLP input width " +
                                std::to_string(input.cols()) + ", expected " +
                                std::to_string(spec.input_dim()));
  }
}

struct LayerVars {
  Var weight;
  Var bias;
};

LayerVars layer_vars(const MlpSpec& spec, const Var& weights, std::size_t l) {
  const std::size_t in = spec.layer_sizes[l], out = spec.layer_sizes[l + 1];
  return {view(weights, spec.weight_offset(l), out, in),
          view(weights, spec.bias_offset(l), 1, out)};
}

}  // namespace

Var forward_mlp(const MlpSpec& spec, const Var& weights, const Var& input) {
  check_shapes(spec, weights.value(), input.value());
  Var h = input;
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const LayerVars lv = layer_vars(spec, weights, l);
    h = add_row(matmul_nt(h, lv.weight), lv.bias);
    if (spec.activated(l)) h = activate(h, spec.activation);
  }
  return h;
}

Tensor forward_mlp(const MlpSpec& spec, const Tensor& weights,
                   const Tensor& input) {
  Tape tape;
  return forward_mlp(spec, tape.constant(weights), tape.constant(input)).value();
}

MlpWithTrace forward_mlp_with_trace(const MlpSpec& spec, const Var& weights,
                                    const Var& input, std::size_t state_dim,
                                    TraceMode mode, const Tensor* probes) {
  check_shapes(spec, weights.value(), input.value());
  if (state_dim == 0 || state_dim > spec.input_dim() ||
      state_dim > spec.output_dim()) {
    throw std::invalid_argument("trace dimension " + std::to_string(state_dim) +
                                " incompatible with MLP shape");
  }
  Tape& tape = input.tape();
  const std::size_t n = input.rows();
  const std::size_t in = spec.input_dim();

  std::size_t copies = 0;
  Tensor seed;
  if (mode == TraceMode::exact) {
    copies = state_dim;
    seed = Tensor::zeros(copies * n, in);
    for (std::size_t j = 0; j < copies; ++j) {
      for (std::size_t i = 0; i < n; ++i) seed.at(j * n + i, j) = 1.0;
    }
  } else {
    if (probes == nullptr || probes->rows() != n || probes->cols() != state_dim) {
      throw std::invalid_argument("Hutchinson trace needs an [N, state_dim] probe");
    }
    copies = 1;
    seed = Tensor::zeros(n, in);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < state_dim; ++j) seed.at(i, j) = probes->at(i, j);
    }
  }

  Var h = input;
  Var tangent = tape.constant(std::move(seed));
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const LayerVars lv = layer_vars(spec, weights, l);
    const Var pre = add_row(matmul_nt(h, lv.weight), lv.bias);
    const Var pre_tangent = matmul_nt(tangent, lv.weight);
    if (spec.activated(l)) {
      h = activate(pre, spec.activation);
      tangent = mul_tiled(pre_tangent, activation_slope(h, spec.activation));
    } else {
      h = pre;
      tangent = pre_tangent;
    }
  }

  Var trace;
  if (mode == TraceMode::exact) {
    trace = block_diagonal_sum(tangent, state_dim);
  } else {
    Tensor padded = Tensor::zeros(n, spec.output_dim());
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < state_dim; ++j) padded.at(i, j) = probes->at(i, j);
    }
    trace = sum_cols(mul(tangent, tape.constant(std::move(padded))));
  }
  return {h, trace};
}

double jacobian_trace(const MlpSpec& spec, const Tensor& weights,
                      std::span<const double> y, double t, TraceMode mode,
                      Rng* rng) {
  const std::size_t d = y.size();
  std::vector<double> row(y.begin(), y.end());
  if (spec.input_dim() == d + 1) {
    row.push_back(t);
  } else if (spec.input_dim() != d) {
    throw std::invalid_argument("jacobian_trace: MLP input width " +
                                std::to_string(spec.input_dim()) +
                                " does not match state dimension " +
                                std::to_string(d));
  }
  Tape tape;
  const Var input = tape.constant(Tensor::matrix(1, row.size(), row));
  const Var w = tape.constant(weights);
  Tensor probe;
  if (mode == TraceMode::hutchinson) {
    if (rng == nullptr) throw std::invalid_argument("Hutchinson trace needs an RNG");
    probe = Tensor::zeros(1, d);
    for (std::size_t j = 0; j < d; ++j) probe[j] = rng->rademacher();
  }
  return forward_mlp_with_trace(spec, w, input, d, mode,
                                mode == TraceMode::hutchinson ? &probe : nullptr)
      .trace.value()
      .item();
}

Tensor init_mlp_weights(const MlpSpec& spec, Rng& rng, double final_scale) {
  spec.validate();
  Tensor w = Tensor::vector(std::vector<double>(spec.parameter_count(), 0.0));
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const std::size_t in = spec.layer_sizes[l], out = spec.layer_sizes[l + 1];
    double std_dev = spec.activation == Activation::relu
                         ? std::sqrt(2.0 / static_cast<double>(in))
                         : std::sqrt(2.0 / static_cast<double>(in + out));
    if (l + 1 == spec.layer_count()) std_dev *= final_scale;
    const std::size_t offset = spec.weight_offset(l);
    for (std::size_t i = 0; i < in * out; ++i) w[offset + i] = std_dev * rng.normal();
  }
  return w;
}

}  // namespace hyperflow
