#pragma once

#include <cstddef>
#include <span>

#include "hyperflow/ops.hpp"
#include "hyperflow/point_cloud.hpp"
#include "hyperflow/rng.hpp"

// Spherical Log-Normal distribution: uniform direction, log-normal radius.
//
//   log f_n(x) = -log|S^{n-1}| - 1/2 log(2 pi) - log sigma - n log|x|
//                - (log|x| - mu)^2 / (2 sigma^2)
//
// which for n = 3 is -log(2 (2 pi)^{3/2}) - log sigma - 3 log|x| - ...
namespace hyperflow::sln {

struct SlnParams {
  double mu = 0.0;     // location of log-radius
  double sigma = 1.0;  // scale of log-radius
  int dim = 3;

  void validate() const;
  friend bool operator==(const SlnParams&, const SlnParams&) = default;
};

/// Linear decay of sigma over training epochs.
struct SigmaSchedule {
  double sigma_start = 1.0;
  double sigma_end = 0.001;
  int n_epochs = 1;

  void validate() const;
  friend bool operator==(const SigmaSchedule&, const SigmaSchedule&) = default;
};

/// log(surface area of the unit sphere S^{dim-1}).
double log_unit_sphere_area(int dim);

/// Throws DomainError at the origin.
double log_density(const SlnParams& p, std::span<const double> x);

/// Row-wise log density of points [N, dim] -> [N, 1], differentiable with
/// respect to the points. Throws DomainError if any row is the origin.
Var log_density(const SlnParams& p, const Var& points);

/// exp(mu + sigma r) * x / |x| with r ~ N(0,1), x ~ N(0, I_dim). Returns
/// [n, dim].
Tensor sample_points(const SlnParams& p, std::size_t n, Rng& rng);
PointCloud sample(const SlnParams& p, std::size_t n, Rng& rng);

/// Parameters whose radius mean and variance equal those of the chi
/// distribution with 3 degrees of freedom (radius of a standard 3D Gaussian).
SlnParams gaussian_matched_params();

/// Radius of the ball holding `mass` of the probability:
/// exp(mu + sigma * Phi^{-1}(mass)).
double quantile_radius(const SlnParams& p, double mass);

/// sigma_start + epoch (sigma_end - sigma_start) / n_epochs, clamped to
/// sigma_end past the last epoch.
double schedule_sigma(const SigmaSchedule& s, int epoch);

double normal_cdf(double x);
/// Inverse standard normal CDF: rational approximation polished by one Halley
/// step against erfc.
double normal_quantile(double p);

}  // namespace hyperflow::sln
