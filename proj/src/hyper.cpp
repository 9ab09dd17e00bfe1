#include "hyperflow/hyper.hpp"

#include <stdexcept>
#include <string>

namespace hyperflow::hyper {

MlpSpec HyperSpec::decoder() const {
  std::vector<std::size_t> sizes{latent_dim};
  sizes.insert(sizes.end(), decoder_hidden.begin(), decoder_hidden.end());
  sizes.push_back(target.parameter_count());
  return MlpSpec{std::move(sizes), Activation::relu, false};
}

MlpSpec HyperSpec::prior_dynamics() const {
  std::vector<std::size_t> sizes{latent_dim + 1};
  sizes.insert(sizes.end(), prior_hidden.begin(), prior_hidden.end());
  sizes.push_back(latent_dim);
  return MlpSpec{std::move(sizes), Activation::tanh, false};
}

TraceMode HyperSpec::prior_trace_mode() const {
  return latent_dim > kExactTraceMaxDim ? TraceMode::hutchinson : TraceMode::exact;
}

void HyperSpec::validate() const {
  if (latent_dim < 1) throw std::invalid_argument("latent_dim must be >= 1");
  odeflow::check_dynamics(target);
  decoder().validate();
  prior_dynamics().validate();
}

HyperParams init_hyper(const HyperSpec& spec, Rng& rng, double output_scale) {
  spec.validate();
  const MlpSpec dec = spec.decoder();
  Tensor decoder = init_mlp_weights(dec, rng, output_scale);
  const Tensor base = init_mlp_weights(spec.target, rng, 0.0);
  const std::size_t last = dec.layer_count() - 1;
  std::copy_n(base.data(), base.size(), decoder.data() + dec.bias_offset(last));
  Tensor prior = init_mlp_weights(spec.prior_dynamics(), rng, output_scale);
  return {std::move(decoder), std::move(prior)};
}

Var decode_weights(const HyperSpec& spec, const Var& decoder, const Var& z) {
  if (z.value().size() != spec.latent_dim) {
    throw std::invalid_argument("latent code has " + std::to_string(z.value().size()) +
                                " entries, expected " + std::to_string(spec.latent_dim));
  }
  const Var row = z.rows() == 1 ? z : view(z, 0, 1, spec.latent_dim);
  return forward_mlp(spec.decoder(), decoder, row);
}

FlowParams decode_weights(const HyperSpec& spec, const HyperParams& hp, const Tensor& z) {
  Tape tape;
  const Var w = decode_weights(spec, tape.constant(hp.decoder),
                               tape.constant(z.reshaped({1, z.size()})));
  return {w.value().reshaped({w.value().size()}), spec.target};
}

odeflow::FlowConfig latent_flow_config(const HyperSpec& spec, odeflow::FlowConfig base) {
  base.trace_mode = spec.prior_trace_mode();
  return base;
}

Var prior_flow_logprob(const HyperSpec& spec, const Var& prior, const Var& z,
                       const odeflow::FlowConfig& cfg, Rng* rng) {
  return odeflow::log_prob(spec.prior_dynamics(), prior, z,
                           odeflow::standard_normal_prior(), cfg, rng);
}

double prior_flow_logprob(const HyperSpec& spec, const HyperParams& hp,
                          const Tensor& z, const odeflow::FlowConfig& cfg, Rng* rng) {
  return odeflow::log_prob(spec.prior_dynamics(), hp.prior, z.reshaped({1, z.size()}),
                           odeflow::standard_normal_prior(), cfg, rng)
      .item();
}

Tensor sample_latent(const HyperSpec& spec, const HyperParams& hp, Rng& rng,
                     const odeflow::FlowConfig& cfg) {
  Tensor w = Tensor::zeros(1, spec.latent_dim);
  for (double& v : w.values()) v = rng.normal();
  return odeflow::flow_forward(spec.prior_dynamics(), hp.prior, w, cfg);
}

FlowParams sample_object(const HyperSpec& spec, const HyperParams& hp, Rng& rng,
                         const odeflow::FlowConfig& cfg) {
  return decode_weights(spec, hp, sample_latent(spec, hp, rng, cfg));
}

}  // namespace hyperflow::hyper
