#include "hyperflow/odeflow.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <string>

#include "hyperflow/errors.hpp"

namespace hyperflow::odeflow {

void FlowConfig::validate() const {
  if (!(t0 < t1)) throw std::invalid_argument("flow needs t0 < t1");
  if (n_steps < 1) throw std::invalid_argument("flow needs n_steps >= 1");
  if (!(rtol > 0.0) || !(atol > 0.0)) {
    throw std::invalid_argument("flow tolerances must be positive");
  }
  if (max_steps < 1) throw std::invalid_argument("flow needs max_steps >= 1");
}

PriorLogDensity standard_normal_prior() {
  return [](const Var& points) {
    const double d = static_cast<double>(points.cols());
    return add_scalar(scale(sum_cols(square(points)), -0.5),
                      -0.5 * d * std::log(2.0 * std::numbers::pi));
  };
}

PriorLogDensity sln_prior(const sln::SlnParams& params) {
  params.validate();
  return [params](const Var& points) { return sln::log_density(params, points); };
}

void check_dynamics(const MlpSpec& spec) {
  spec.validate();
  if (spec.input_dim() != spec.output_dim() + 1) {
    throw std::invalid_argument(
        "flow dynamics must map [y, t] of width d+1 to d outputs");
  }
}

namespace {

using State = std::vector<Var>;
using Rhs = std::function<State(Tape&, const State&, double)>;
using WeightsOn = std::function<Var(Tape&)>;

constexpr std::size_t kValueChunkRows = 4096;

WeightsOn weights_from(const Var& weights) {
  return [weights](Tape& tape) {
    return &weights.tape() == &tape ? weights : tape.constant(weights.value());
  };
}

WeightsOn weights_from(const Tensor& weights) {
  return [&weights](Tape& tape) { return tape.constant(weights); };
}

Var time_column(Tape& tape, std::size_t rows, double t) {
  return tape.constant(Tensor::filled(rows, 1, t));
}

Rhs velocity_rhs(const MlpSpec& spec, WeightsOn weights) {
  return [spec, weights = std::move(weights)](Tape& tape, const State& s,
                                              double t) -> State {
    const Var input = concat_cols(s[0], time_column(tape, s[0].rows(), t));
    return {forward_mlp(spec, weights(tape), input)};
  };
}

Rhs density_rhs(const MlpSpec& spec, WeightsOn weights, TraceMode mode,
                const Tensor* probes) {
  return [spec, weights = std::move(weights), mode, probes](
             Tape& tape, const State& s, double t) -> State {
    const Var input = concat_cols(s[0], time_column(tape, s[0].rows(), t));
    MlpWithTrace r = forward_mlp_with_trace(spec, weights(tape), input,
                                            spec.output_dim(), mode, probes);
    return {r.output, r.trace};
  };
}

State step_combine(const State& base, std::span<const double> coeffs,
                   std::span<const State> ks) {
  State out;
  out.reserve(base.size());
  std::vector<Var> terms(ks.size());
  for (std::size_t c = 0; c < base.size(); ++c) {
    for (std::size_t k = 0; k < ks.size(); ++k) terms[k] = ks[k][c];
    out.push_back(combine(base[c], coeffs, terms));
  }
  return out;
}

State rebase(Tape& tape, const State& s) {
  State out;
  out.reserve(s.size());
  for (const Var& v : s) out.push_back(tape.constant(v.value()));
  return out;
}

bool finite_state(const State& s) {
  return std::all_of(s.begin(), s.end(),
                     [](const Var& v) { return v.value().all_finite(); });
}

// Dormand-Prince 5(4) tableau.
constexpr std::array<double, 7> kC = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
constexpr double kA[6][6] = {
    {1.0 / 5, 0, 0, 0, 0, 0},
    {3.0 / 40, 9.0 / 40, 0, 0, 0, 0},
    {44.0 / 45, -56.0 / 15, 32.0 / 9, 0, 0, 0},
    {19372.0 / 6561, -25360.0 / 2187, 64448.0 / 6561, -212.0 / 729, 0, 0},
    {9017.0 / 3168, -355.0 / 33, 46732.0 / 5247, 49.0 / 176, -5103.0 / 18656, 0},
    {35.0 / 384, 0, 500.0 / 1113, 125.0 / 192, -2187.0 / 6784, 11.0 / 84}};
// Fifth-order weights minus embedded fourth-order weights.
constexpr std::array<double, 7> kE = {
    35.0 / 384 - 5179.0 / 57600, 0.0,
    500.0 / 1113 - 7571.0 / 16695, 125.0 / 192 - 393.0 / 640,
    -2187.0 / 6784 + 92097.0 / 339200, 11.0 / 84 - 187.0 / 2100, -1.0 / 40};

/// Integrates `rhs` from t_start to t_end (either direction). With
/// `grad_tape` set every stage is recorded on that tape; otherwise each step
/// runs on a fresh scratch tape and only values survive.
class Integrator {
 public:
  Integrator(Rhs rhs, const FlowConfig& cfg, Tape* grad_tape)
      : rhs_(std::move(rhs)), cfg_(cfg), grad_tape_(grad_tape) {}

  State run(State y, double t_start, double t_end) {
    if (cfg_.solver == Solver::rk4_fixed) return run_rk4(std::move(y), t_start, t_end);
    return run_dopri5(std::move(y), t_start, t_end);
  }

 private:
  Tape& begin_step(State& y, State* extra = nullptr) {
    if (grad_tape_) return *grad_tape_;
    auto next = std::make_unique<Tape>();
    y = rebase(*next, y);
    if (extra && !extra->empty()) *extra = rebase(*next, *extra);
    scratch_ = std::move(next);
    return *scratch_;
  }

  State run_rk4(State y, double t_start, double t_end) {
    const int n = cfg_.n_steps;
    const double h = (t_end - t_start) / n;
    for (int i = 0; i < n; ++i) {
      const double t = t_start + i * h;
      Tape& tape = begin_step(y);
      const State k1 = rhs_(tape, y, t);
      const double half[] = {0.5 * h};
      const State k2 = rhs_(tape, step_combine(y, half, std::span(&k1, 1)), t + 0.5 * h);
      const State k3 = rhs_(tape, step_combine(y, half, std::span(&k2, 1)), t + 0.5 * h);
      const double full[] = {h};
      const State k4 = rhs_(tape, step_combine(y, full, std::span(&k3, 1)), t + h);
      const State ks[] = {k1, k2, k3, k4};
      const double weights[] = {h / 6.0, h / 3.0, h / 3.0, h / 6.0};
      y = step_combine(y, weights, ks);
      if (!finite_state(y)) {
        throw DivergenceError("flow state became non-finite at t=" + std::to_string(t + h));
      }
    }
    return y;
  }

  double error_norm(const State& y, const State& y_new,
                    const std::array<State, 7>& k, double h) const {
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t c = 0; c < y.size(); ++c) {
      const Tensor& y0 = y[c].value();
      const Tensor& y1 = y_new[c].value();
      for (std::size_t i = 0; i < y0.size(); ++i) {
        double err = 0.0;
        for (std::size_t s = 0; s < 7; ++s) {
          if (kE[s] != 0.0) err += kE[s] * k[s][c].value()[i];
        }
        err *= h;
        const double tol =
            cfg_.atol + cfg_.rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
        acc += (err / tol) * (err / tol);
        ++count;
      }
    }
    return std::sqrt(acc / static_cast<double>(std::max<std::size_t>(count, 1)));
  }

  State run_dopri5(State y, double t_start, double t_end) {
    const double span_len = t_end - t_start;
    const double dir = span_len > 0 ? 1.0 : -1.0;
    double h = span_len / cfg_.n_steps;
    double t = t_start;
    State k_first;
    int attempts = 0;
    while (dir * (t_end - t) > 1e-14 * std::abs(span_len)) {
      if (++attempts > cfg_.max_steps) {
        throw DivergenceError("adaptive solver exceeded " +
                              std::to_string(cfg_.max_steps) + " steps");
      }
      if (dir * (t + h - t_end) > 0) h = t_end - t;
      Tape& tape = begin_step(y, &k_first);
      std::array<State, 7> k;
      k[0] = k_first.empty() ? rhs_(tape, y, t) : k_first;
      for (std::size_t s = 1; s < 7; ++s) {
        std::vector<double> coeffs(s);
        for (std::size_t j = 0; j < s; ++j) coeffs[j] = h * kA[s - 1][j];
        const State stage = step_combine(y, coeffs, std::span(k.data(), s));
        if (s == 6) {
          // Stage 7 is evaluated at the fifth-order solution (FSAL).
          k[6] = rhs_(tape, stage, t + h);
          const double err = error_norm(y, stage, k, h);
          if (std::isfinite(err) && err <= 1.0 && finite_state(stage)) {
            t += h;
            y = stage;
            k_first = k[6];
            const double grow = err == 0.0 ? 10.0 : 0.9 * std::pow(err, -0.2);
            h *= std::clamp(grow, 0.2, 10.0);
          } else {
            const double shrink =
                std::isfinite(err) ? std::clamp(0.9 * std::pow(err, -0.2), 0.2, 1.0) : 0.2;
            h *= shrink;
            k_first = k[0];
          }
        } else {
          k[s] = rhs_(tape, stage, t + kC[s] * h);
        }
      }
      if (std::abs(h) < 1e-12 * std::abs(span_len)) {
        throw DivergenceError("adaptive step size underflow at t=" + std::to_string(t));
      }
    }
    return y;
  }

  Rhs rhs_;
  FlowConfig cfg_;
  Tape* grad_tape_;
  std::unique_ptr<Tape> scratch_;
};

std::vector<Tensor> values_of(const State& s) {
  std::vector<Tensor> out;
  out.reserve(s.size());
  for (const Var& v : s) out.push_back(v.value());
  return out;
}

Tensor rows_slice(const Tensor& t, std::size_t begin, std::size_t end) {
  const std::size_t m = t.cols();
  std::vector<double> data(t.data() + begin * m, t.data() + end * m);
  return Tensor::matrix(end - begin, m, std::move(data));
}

void append_rows(Tensor& out, const Tensor& block, std::size_t at) {
  std::copy_n(block.data(), block.size(), out.data() + at * out.cols());
}

Tensor rademacher_probes(std::size_t n, std::size_t d, Rng* rng) {
  if (rng == nullptr) throw std::invalid_argument("Hutchinson trace needs an RNG");
  Tensor probes = Tensor::zeros(n, d);
  for (double& v : probes.values()) v = rng->rademacher();
  return probes;
}

void check_points(const MlpSpec& spec, const Tensor& points) {
  check_dynamics(spec);
  if (points.cols() != spec.output_dim()) {
    throw std::invalid_argument("flow points have " + std::to_string(points.cols()) +
                                " columns, dynamics expect " +
                                std::to_string(spec.output_dim()));
  }
}

Tensor transport_values(const MlpSpec& spec, const Tensor& weights,
                        const Tensor& points, const FlowConfig& cfg,
                        double t_start, double t_end) {
  cfg.validate();
  check_points(spec, points);
  const std::size_t n = points.rows();
  Tensor out = Tensor::zeros(n, points.cols());
  for (std::size_t begin = 0; begin < n; begin += kValueChunkRows) {
    const std::size_t end = std::min(n, begin + kValueChunkRows);
    Integrator integrator(velocity_rhs(spec, weights_from(weights)), cfg, nullptr);
    Tape seed_tape;
    State y{seed_tape.constant(rows_slice(points, begin, end))};
    const std::vector<Tensor> result = values_of(integrator.run(std::move(y), t_start, t_end));
    append_rows(out, result[0], begin);
  }
  return out;
}

Var transport(const MlpSpec& spec, const Var& weights, const Var& points,
              const FlowConfig& cfg, double t_start, double t_end) {
  cfg.validate();
  check_points(spec, points.value());
  Integrator integrator(velocity_rhs(spec, weights_from(weights)), cfg, &points.tape());
  return integrator.run({points}, t_start, t_end)[0];
}

}  // namespace

Tensor flow_forward(const MlpSpec& spec, const Tensor& weights, const Tensor& y0,
                    const FlowConfig& cfg) {
  return transport_values(spec, weights, y0, cfg, cfg.t0, cfg.t1);
}

Var flow_forward(const MlpSpec& spec, const Var& weights, const Var& y0,
                 const FlowConfig& cfg) {
  return transport(spec, weights, y0, cfg, cfg.t0, cfg.t1);
}

Tensor flow_inverse(const MlpSpec& spec, const Tensor& weights, const Tensor& x,
                    const FlowConfig& cfg) {
  return transport_values(spec, weights, x, cfg, cfg.t1, cfg.t0);
}

Var flow_inverse(const MlpSpec& spec, const Var& weights, const Var& x,
                 const FlowConfig& cfg) {
  return transport(spec, weights, x, cfg, cfg.t1, cfg.t0);
}

Var log_prob(const MlpSpec& spec, const Var& weights, const Var& x,
             const PriorLogDensity& prior, const FlowConfig& cfg, Rng* rng) {
  cfg.validate();
  check_points(spec, x.value());
  Tape& tape = x.tape();
  const std::size_t n = x.rows(), d = x.cols();
  Tensor probes;
  if (cfg.trace_mode == TraceMode::hutchinson) probes = rademacher_probes(n, d, rng);
  Integrator integrator(
      density_rhs(spec, weights_from(weights), cfg.trace_mode,
                  cfg.trace_mode == TraceMode::hutchinson ? &probes : nullptr),
      cfg, &tape);
  const State end = integrator.run({x, tape.constant(Tensor::zeros(n, 1))}, cfg.t1, cfg.t0);
  return add(prior(end[0]), end[1]);
}

Tensor log_prob(const MlpSpec& spec, const Tensor& weights, const Tensor& x,
                const PriorLogDensity& prior, const FlowConfig& cfg, Rng* rng) {
  cfg.validate();
  check_points(spec, x);
  const std::size_t n = x.rows(), d = x.cols();
  Tensor out = Tensor::zeros(n, 1);
  for (std::size_t begin = 0; begin < n; begin += kValueChunkRows) {
    const std::size_t end = std::min(n, begin + kValueChunkRows);
    Tensor probes;
    if (cfg.trace_mode == TraceMode::hutchinson) {
      probes = rademacher_probes(end - begin, d, rng);
    }
    Integrator integrator(
        density_rhs(spec, weights_from(weights), cfg.trace_mode,
                    cfg.trace_mode == TraceMode::hutchinson ? &probes : nullptr),
        cfg, nullptr);
    Tape seed_tape;
    State start{seed_tape.constant(rows_slice(x, begin, end)),
                seed_tape.constant(Tensor::zeros(end - begin, 1))};
    const std::vector<Tensor> result = values_of(integrator.run(std::move(start), cfg.t1, cfg.t0));
    Tape prior_tape;
    const Var lp = add(prior(prior_tape.constant(result[0])), prior_tape.constant(result[1]));
    append_rows(out, lp.value(), begin);
  }
  return out;
}

Var flow_cost(const MlpSpec& spec, const Var& weights, const Var& x,
              const PriorLogDensity& prior, const FlowConfig& cfg, Rng* rng) {
  if (x.rows() == 0) throw std::invalid_argument("flow cost of an empty batch");
  return neg(mean(log_prob(spec, weights, x, prior, cfg, rng)));
}

}  // namespace hyperflow::odeflow
