#include "hyperflow/encoder.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace hyperflow::encoder {
namespace {

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

Tensor standard_normals(std::size_t d, Rng& rng) {
  Tensor eps = Tensor::zeros(1, d);
  for (double& v : eps.values()) v = rng.normal();
  return eps;
}

}  // namespace

MlpSpec EncoderSpec::point_mlp() const {
  return MlpSpec{point_layers, Activation::relu, true};
}

MlpSpec EncoderSpec::head() const {
  return MlpSpec{{point_layers.back(), latent_dim}, Activation::relu, false};
}

std::size_t EncoderSpec::parameter_count() const {
  return point_mlp().parameter_count() + 2 * head().parameter_count();
}

void EncoderSpec::validate() const {
  if (point_layers.size() < 2 || point_layers.front() != 3) {
    throw std::invalid_argument("encoder point MLP must start at width 3");
  }
  if (latent_dim < 1) throw std::invalid_argument("latent_dim must be >= 1");
  point_mlp().validate();
}

Tensor init_encoder(const EncoderSpec& spec, Rng& rng) {
  spec.validate();
  const Tensor body = init_mlp_weights(spec.point_mlp(), rng);
  const MlpSpec head = spec.head();
  // Heads are linear; Xavier scale rather than He.
  const MlpSpec linear_head{head.layer_sizes, Activation::tanh, false};
  const Tensor mean_head = init_mlp_weights(linear_head, rng);
  const Tensor logvar_head = init_mlp_weights(linear_head, rng, 0.1);
  std::vector<double> flat;
  flat.reserve(spec.parameter_count());
  for (const Tensor* t : {&body, &mean_head, &logvar_head}) {
    flat.insert(flat.end(), t->values().begin(), t->values().end());
  }
  return Tensor::vector(std::move(flat));
}

PosteriorVars encode(const EncoderSpec& spec, const Var& params, const Var& points) {
  spec.validate();
  if (params.value().size() != spec.parameter_count()) {
    throw std::invalid_argument("encoder expects " +
                                std::to_string(spec.parameter_count()) +
                                " parameters, got " +
                                std::to_string(params.value().size()));
  }
  if (points.rows() == 0 || points.value().size() == 0) {
    throw std::invalid_argument("cannot encode an empty point cloud");
  }
  const MlpSpec body = spec.point_mlp();
  const MlpSpec head = spec.head();
  const std::size_t nb = body.parameter_count(), nh = head.parameter_count();
  const Var features = forward_mlp(body, view(params, 0, 1, nb), points);
  const Var pooled = max_rows(features);
  const Var mean = forward_mlp(head, view(params, nb, 1, nh), pooled);
  const Var raw = forward_mlp(head, view(params, nb + nh, 1, nh), pooled);
  return {mean, clamp(raw, kLogvarMin, kLogvarMax)};
}

Posterior encode(const EncoderSpec& spec, const Tensor& params, const PointCloud& cloud) {
  if (cloud.empty()) throw std::invalid_argument("cannot encode an empty point cloud");
  Tape tape;
  const PosteriorVars post =
      encode(spec, tape.constant(params), tape.constant(cloud.to_tensor()));
  return {post.mean.value(), post.logvar.value()};
}

LatentSample reparam(const PosteriorVars& post, const Tensor& eps) {
  if (eps.size() != post.mean.value().size()) {
    throw std::invalid_argument("reparam noise has the wrong dimension");
  }
  Tape& tape = post.mean.tape();
  const Var e = tape.constant(eps.reshaped({1, eps.size()}));
  const Var z = post.mean + mul(exp(scale(post.logvar, 0.5)), e);
  // log N(z; mean, exp(logvar)) with (z - mean) / std = eps.
  const double d = static_cast<double>(eps.size());
  double sq = 0.0;
  for (double v : eps.values()) sq += v * v;
  const Var logq =
      add_scalar(scale(sum(post.logvar), -0.5), -0.5 * sq - 0.5 * d * kLog2Pi);
  return {z, logq};
}

LatentSample reparam_sample(const PosteriorVars& post, Rng& rng) {
  return reparam(post, standard_normals(post.mean.value().size(), rng));
}

LatentValue reparam_sample(const Posterior& post, Rng& rng) {
  Tape tape;
  const PosteriorVars vars{tape.constant(post.mean), tape.constant(post.logvar)};
  const LatentSample s = reparam_sample(vars, rng);
  return {s.z.value(), s.logq.value().item()};
}

Var entropy(const PosteriorVars& post) {
  const double d = static_cast<double>(post.logvar.value().size());
  return add_scalar(scale(sum(post.logvar), 0.5), 0.5 * d * (1.0 + kLog2Pi));
}

double entropy(const Posterior& post) {
  double total = 0.0;
  for (double v : post.logvar.values()) total += v;
  const double d = static_cast<double>(post.logvar.size());
  return 0.5 * d * (1.0 + kLog2Pi) + 0.5 * total;
}

}  // namespace hyperflow::encoder
