#pragma once

#include <cstddef>
#include <vector>

#include "hyperflow/mlp.hpp"
#include "hyperflow/point_cloud.hpp"

// Permutation-invariant point-cloud encoder: a shared per-point MLP, a
// max-pool over points, then two linear heads for the mean and log-variance
// of a diagonal Gaussian over the latent code.
namespace hyperflow::encoder {

inline constexpr double kLogvarMin = -10.0;
inline constexpr double kLogvarMax = 10.0;

struct EncoderSpec {
  std::vector<std::size_t> point_layers{3, 64, 128, 256};
  std::size_t latent_dim = 32;

  MlpSpec point_mlp() const;  // relu, activated output
  MlpSpec head() const;       // linear features -> latent
  std::size_t parameter_count() const;
  void validate() const;

  friend bool operator==(const EncoderSpec&, const EncoderSpec&) = default;
};

/// Flat layout: point MLP, mean head, log-variance head.
Tensor init_encoder(const EncoderSpec& spec, Rng& rng);

struct Posterior {
  Tensor mean;    // [1, D]
  Tensor logvar;  // [1, D]
};

struct PosteriorVars {
  Var mean;
  Var logvar;
};

/// Points [N, 3] with N >= 1.
PosteriorVars encode(const EncoderSpec& spec, const Var& params, const Var& points);
Posterior encode(const EncoderSpec& spec, const Tensor& params, const PointCloud& cloud);

struct LatentSample {
  Var z;     // [1, D]
  Var logq;  // scalar
};

/// z = mean + exp(logvar / 2) * eps with the given eps [1, D].
LatentSample reparam(const PosteriorVars& post, const Tensor& eps);
LatentSample reparam_sample(const PosteriorVars& post, Rng& rng);

struct LatentValue {
  Tensor z;
  double logq = 0.0;
};
LatentValue reparam_sample(const Posterior& post, Rng& rng);

/// (D/2)(1 + log 2 pi) + 1/2 sum logvar.
Var entropy(const PosteriorVars& post);
double entropy(const Posterior& post);

}  // namespace hyperflow::encoder
