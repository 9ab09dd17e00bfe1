#pragma once

#include <functional>
#include <vector>

#include "hyperflow/mlp.hpp"
#include "hyperflow/rng.hpp"
#include "hyperflow/sln.hpp"

// Continuous normalizing flows with MLP dynamics dy/dt = f([y, t]).
//
// The forward map integrates t0 -> t1 (prior sample to data point); the
// inverse integrates t1 -> t0. Densities follow the instantaneous change of
// variables: with the augmented state (y, delta), d delta / dt = Tr(df/dy)
// integrated from (x, 0) at t1 down to t0,
//
//   log p(x) = log g(y(t0)) + delta(t0).
//
// Gradients come from differentiating through the unrolled solver steps.
namespace hyperflow::odeflow {

enum class Solver { rk4_fixed, dopri5_adaptive };

struct FlowConfig {
  double t0 = 0.0;
  double t1 = 1.0;
  Solver solver = Solver::rk4_fixed;
  int n_steps = 20;
  double rtol = 1e-5;
  double atol = 1e-5;
  TraceMode trace_mode = TraceMode::exact;
  /// Attempted-step budget of the adaptive solver.
  int max_steps = 10000;

  void validate() const;
  friend bool operator==(const FlowConfig&, const FlowConfig&) = default;
};

/// Row-wise prior log density, [N, d] -> [N, 1].
using PriorLogDensity = std::function<Var(const Var& points)>;

PriorLogDensity standard_normal_prior();
PriorLogDensity sln_prior(const sln::SlnParams& params);

/// Throws std::invalid_argument unless the MLP maps [y, t] to dy/dt.
void check_dynamics(const MlpSpec& spec);

/// y(t1) for every row of y0 [N, d].
Tensor flow_forward(const MlpSpec& spec, const Tensor& weights, const Tensor& y0,
                    const FlowConfig& cfg);
Var flow_forward(const MlpSpec& spec, const Var& weights, const Var& y0,
                 const FlowConfig& cfg);

/// y(t0) for every row of x [N, d].
Tensor flow_inverse(const MlpSpec& spec, const Tensor& weights, const Tensor& x,
                    const FlowConfig& cfg);
Var flow_inverse(const MlpSpec& spec, const Var& weights, const Var& x,
                 const FlowConfig& cfg);

/// Row-wise log density [N, 1] of points x under the flow. Hutchinson mode
/// draws one Rademacher probe per row from `rng` and holds it fixed over the
/// solve.
Var log_prob(const MlpSpec& spec, const Var& weights, const Var& x,
             const PriorLogDensity& prior, const FlowConfig& cfg,
             Rng* rng = nullptr);
Tensor log_prob(const MlpSpec& spec, const Tensor& weights, const Tensor& x,
                const PriorLogDensity& prior, const FlowConfig& cfg,
                Rng* rng = nullptr);

/// Negative mean log-likelihood of the rows of x (a scalar to minimize).
Var flow_cost(const MlpSpec& spec, const Var& weights, const Var& x,
              const PriorLogDensity& prior, const FlowConfig& cfg,
              Rng* rng = nullptr);

}  // namespace hyperflow::odeflow
