#include "hyperflow/sln.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "hyperflow/errors.hpp"

namespace hyperflow::sln {

void SlnParams::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw std::invalid_argument("SLN sigma must be positive, got " +
                                std::to_string(sigma));
  }
  if (!std::isfinite(mu)) throw std::invalid_argument("SLN mu must be finite");
  if (dim < 2) throw std::invalid_argument("SLN dimension must be at least 2");
}

void SigmaSchedule::validate() const {
  if (!(sigma_end > 0.0) || sigma_start < sigma_end) {
    throw std::invalid_argument("sigma schedule needs sigma_start >= sigma_end > 0");
  }
  if (n_epochs < 1) throw std::invalid_argument("sigma schedule needs n_epochs >= 1");
}

double log_unit_sphere_area(int dim) {
  const double n = static_cast<double>(dim);
  return std::log(2.0) + 0.5 * n * std::log(std::numbers::pi) - std::lgamma(0.5 * n);
}

namespace {

double log_normalizer(const SlnParams& p) {
  return -log_unit_sphere_area(p.dim) - 0.5 * std::log(2.0 * std::numbers::pi) -
         std::log(p.sigma);
}

}  // namespace

double log_density(const SlnParams& p, std::span<const double> x) {
  p.validate();
  if (x.size() != static_cast<std::size_t>(p.dim)) {
    throw std::invalid_argument("SLN point has dimension " +
                                std::to_string(x.size()));
  }
  double r2 = 0.0;
  for (double v : x) r2 += v * v;
  if (!(r2 > 0.0)) throw DomainError("SLN log density evaluated at the origin");
  const double log_r = 0.5 * std::log(r2);
  const double z = log_r - p.mu;
  return log_normalizer(p) - p.dim * log_r - z * z / (2.0 * p.sigma * p.sigma);
}

Var log_density(const SlnParams& p, const Var& points) {
  p.validate();
  if (points.cols() != static_cast<std::size_t>(p.dim)) {
    throw std::invalid_argument("SLN points have " + std::to_string(points.cols()) +
                                " columns, expected " + std::to_string(p.dim));
  }
  const Var r2 = sum_cols(square(points));
  for (double v : r2.value().values()) {
    if (!(v > 0.0)) throw DomainError("SLN log density evaluated at the origin");
  }
  const Var log_r = scale(log(r2), 0.5);
  const Var radial = scale(square(add_scalar(log_r, -p.mu)),
                           -1.0 / (2.0 * p.sigma * p.sigma));
  return add_scalar(add(scale(log_r, -static_cast<double>(p.dim)), radial),
                    log_normalizer(p));
}

Tensor sample_points(const SlnParams& p, std::size_t n, Rng& rng) {
  p.validate();
  const std::size_t d = static_cast<std::size_t>(p.dim);
  Tensor out = Tensor::zeros(n, d);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> x(d);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = normal(rng.engine());
    double len2 = 0.0;
    do {
      len2 = 0.0;
      for (double& v : x) {
        v = normal(rng.engine());
        len2 += v * v;
      }
    } while (len2 == 0.0);
    const double radius = std::exp(p.mu + p.sigma * r) / std::sqrt(len2);
    for (std::size_t c = 0; c < d; ++c) out.at(i, c) = radius * x[c];
  }
  return out;
}

PointCloud sample(const SlnParams& p, std::size_t n, Rng& rng) {
  if (p.dim != 3) throw std::invalid_argument("point clouds are 3D");
  return PointCloud::from_tensor(sample_points(p, n, rng));
}

SlnParams gaussian_matched_params() {
  const double pi = std::numbers::pi;
  SlnParams p;
  p.mu = std::log(8.0 / pi) - 0.5 * std::log(3.0);
  p.sigma = std::sqrt(std::log(3.0 * pi / 8.0));
  p.dim = 3;
  return p;
}

double quantile_radius(const SlnParams& p, double mass) {
  p.validate();
  if (!(mass > 0.0 && mass < 1.0)) {
    throw std::invalid_argument("quantile mass must lie in (0, 1), got " +
                                std::to_string(mass));
  }
  return std::exp(p.mu + p.sigma * normal_quantile(mass));
}

double schedule_sigma(const SigmaSchedule& s, int epoch) {
  s.validate();
  if (epoch < 0) throw std::invalid_argument("negative epoch");
  if (epoch >= s.n_epochs) return s.sigma_end;
  return s.sigma_start +
         epoch * (s.sigma_end - s.sigma_start) / static_cast<double>(s.n_epochs);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument("normal quantile needs p in (0, 1)");
  }
  // Upper half by symmetry: 1 - p is exact there, the CDF near 1 is not.
  if (p > 0.5) return -normal_quantile(1.0 - p);
  // Acklam's rational approximation, |relative error| < 1.2e-9.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double p_low = 0.02425;

  double x = 0.0;
  if (p < p_low) {
    const double q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else {
    const double q = p - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  }
  const double e = normal_cdf(x) - p;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

}  // namespace hyperflow::sln
