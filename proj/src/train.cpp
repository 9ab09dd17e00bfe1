#include "hyperflow/train.hpp"

#include <chrono>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "hyperflow/errors.hpp"

namespace hyperflow::train {

ModelSpec ModelSpec::with_latent_dim(std::size_t d) {
  ModelSpec m;
  m.encoder.latent_dim = d;
  m.hyper.latent_dim = d;
  return m;
}

void ModelSpec::validate() const {
  encoder.validate();
  hyper.validate();
  if (encoder.latent_dim != hyper.latent_dim) {
    throw std::invalid_argument("encoder and hypernetwork latent widths differ");
  }
}

void TrainConfig::validate() const {
  if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (points_per_cloud < 1) throw std::invalid_argument("points_per_cloud must be >= 1");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
    throw std::invalid_argument("learning_rate must be finite and >= 0");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw std::invalid_argument("adam_eps must be positive");
  effective_schedule().validate();
  flow.validate();
  prior_flow.validate();
}

double TrainConfig::mu() const {
  return warm_start ? sln::gaussian_matched_params().mu : sln_mu;
}

sln::SigmaSchedule TrainConfig::effective_schedule() const {
  sln::SigmaSchedule s = schedule;
  if (warm_start) s.sigma_start = sln::gaussian_matched_params().sigma;
  return s;
}

bool operator==(const TrainState& a, const TrainState& b) {
  return a.model == b.model && a.encoder == b.encoder &&
         a.hyper.decoder == b.hyper.decoder && a.hyper.prior == b.hyper.prior &&
         a.encoder_opt == b.encoder_opt && a.decoder_opt == b.decoder_opt &&
         a.prior_opt == b.prior_opt && a.step == b.step && a.epoch == b.epoch &&
         a.mu == b.mu && a.sigma == b.sigma && a.rng == b.rng;
}

namespace {

AdamMoments zero_moments(const Tensor& like) {
  return {Tensor::zeros_like(like), Tensor::zeros_like(like)};
}

Tensor flat_row(const Tensor& t) { return t.reshaped({1, t.size()}); }

}  // namespace

TrainState init_state(const ModelSpec& model, const TrainConfig& cfg) {
  model.validate();
  cfg.validate();
  TrainState s;
  s.model = model;
  s.rng = Rng(cfg.seed);
  s.encoder = encoder::init_encoder(model.encoder, s.rng);
  s.hyper = hyper::init_hyper(model.hyper, s.rng);
  s.encoder_opt = zero_moments(s.encoder);
  s.decoder_opt = zero_moments(s.hyper.decoder);
  s.prior_opt = zero_moments(s.hyper.prior);
  s.mu = cfg.mu();
  s.sigma = sln::schedule_sigma(cfg.effective_schedule(), 0);
  return s;
}

CostTerms hyperflow_cost(const ModelSpec& model, const ParamVars& params,
                         const PointCloud& cloud, const sln::SlnParams& sln,
                         const TrainConfig& cfg, Rng& rng, const Tensor* eps) {
  if (cloud.empty()) throw std::invalid_argument("hyperflow cost of an empty cloud");
  Tape& tape = params.encoder.tape();
  const Var points = tape.constant(cloud.to_tensor());
  const encoder::PosteriorVars post = encoder::encode(model.encoder, params.encoder, points);
  const encoder::LatentSample latent =
      eps ? encoder::reparam(post, *eps) : encoder::reparam_sample(post, rng);
  const Var theta = hyper::decode_weights(model.hyper, params.decoder, latent.z);

  const Var flow = odeflow::flow_cost(model.hyper.target, theta, points,
                                      odeflow::sln_prior(sln), cfg.flow, &rng);
  const odeflow::FlowConfig latent_cfg = hyper::latent_flow_config(model.hyper, cfg.prior_flow);
  const Var prior = neg(sum(hyper::prior_flow_logprob(model.hyper, params.prior,
                                                     latent.z, latent_cfg, &rng)));
  const Var ent = encoder::entropy(post);
  const double wf = cfg.weights.flow, wp = cfg.weights.prior, we = cfg.weights.entropy;
  const double coeffs[] = {wp, -we};
  const Var terms[] = {prior, ent};
  const Var total = combine(scale(flow, wf), coeffs, terms);
  return {total, flow, prior, ent};
}

namespace {

ParamVars leaves(Tape& tape, const TrainState& s) {
  return {tape.leaf(s.encoder), tape.leaf(flat_row(s.hyper.decoder)),
          tape.leaf(flat_row(s.hyper.prior))};
}

CostValues values_of(const CostTerms& t) {
  return {t.total.value().item(), t.flow.value().item(), t.prior.value().item(),
          t.entropy.value().item()};
}

bool finite(const CostValues& c) {
  return std::isfinite(c.total) && std::isfinite(c.flow) && std::isfinite(c.prior) &&
         std::isfinite(c.entropy);
}

PointCloud subsample(const PointCloud& cloud, std::size_t n, Rng& rng) {
  if (cloud.size() <= n) return cloud;
  std::vector<std::size_t> idx(cloud.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  PointCloud out;
  out.points.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + rng.index(idx.size() - i);
    std::swap(idx[i], idx[j]);
    out.points.push_back(cloud.points[idx[i]]);
  }
  return out;
}

void accumulate(Tensor& into, const Tensor& g, double w) {
  for (std::size_t i = 0; i < into.size(); ++i) into[i] += w * g[i];
}

}  // namespace

CostValues evaluate_cost(const TrainState& state, const PointCloud& cloud,
                         const TrainConfig& cfg, Rng& rng, const Tensor* eps) {
  Tape tape;
  const ParamVars p{tape.constant(state.encoder), tape.constant(flat_row(state.hyper.decoder)),
                    tape.constant(flat_row(state.hyper.prior))};
  return values_of(hyperflow_cost(state.model, p, cloud, state.sln(), cfg, rng, eps));
}

CostValues cost_and_gradient(const TrainState& state, const PointCloud& cloud,
                             const TrainConfig& cfg, Rng& rng, Gradients& grad,
                             const Tensor* eps) {
  Tape tape;
  const ParamVars p = leaves(tape, state);
  const CostTerms terms = hyperflow_cost(state.model, p, cloud, state.sln(), cfg, rng, eps);
  std::vector<Tensor> g = tape.grad(terms.total, {p.encoder, p.decoder, p.prior});
  grad.encoder = std::move(g[0]);
  grad.decoder = g[1].reshaped({g[1].size()});
  grad.prior = g[2].reshaped({g[2].size()});
  return values_of(terms);
}

void adam_update(Tensor& param, AdamMoments& opt, const Tensor& grad,
                 std::uint64_t step, const TrainConfig& cfg) {
  if (grad.size() != param.size() || opt.m.size() != param.size() ||
      opt.v.size() != param.size()) {
    throw std::invalid_argument("adam: gradient or moments not congruent with parameters");
  }
  const double b1 = cfg.beta1, b2 = cfg.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
  for (std::size_t i = 0; i < param.size(); ++i) {
    opt.m[i] = b1 * opt.m[i] + (1.0 - b1) * grad[i];
    opt.v[i] = b2 * opt.v[i] + (1.0 - b2) * grad[i] * grad[i];
    const double mhat = opt.m[i] / c1;
    const double vhat = opt.v[i] / c2;
    param[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
  }
}

EpochMetrics train_epoch(TrainState& state, const std::vector<PointCloud>& dataset,
                         const TrainConfig& cfg) {
  if (dataset.empty()) throw std::invalid_argument("training dataset is empty");
  cfg.validate();
  const auto started = std::chrono::steady_clock::now();
  EpochMetrics m;
  m.epoch = state.epoch;
  m.sigma = state.sigma;

  std::vector<std::size_t> order(dataset.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  state.rng.shuffle(order.begin(), order.end());

  std::size_t counted = 0;
  for (std::size_t begin = 0; begin < order.size(); begin += cfg.batch_size) {
    const std::size_t end = std::min(order.size(), begin + cfg.batch_size);
    const double w = 1.0 / static_cast<double>(end - begin);
    Gradients total{Tensor::zeros_like(state.encoder), Tensor::zeros_like(state.hyper.decoder),
                    Tensor::zeros_like(state.hyper.prior)};
    CostValues batch;
    bool ok = true;
    ++m.batches;
    for (std::size_t i = begin; i < end && ok; ++i) {
      const PointCloud cloud = subsample(dataset[order[i]], cfg.points_per_cloud, state.rng);
      Gradients g;
      try {
        const CostValues c = cost_and_gradient(state, cloud, cfg, state.rng, g);
        if (!finite(c)) {
          ok = false;
          m.warnings.push_back("non-finite cost on cloud " + std::to_string(order[i]));
          break;
        }
        batch.total += w * c.total;
        batch.flow += w * c.flow;
        batch.prior += w * c.prior;
        batch.entropy += w * c.entropy;
      } catch (const DomainError& e) {
        ok = false;
        m.warnings.push_back("cloud " + std::to_string(order[i]) + ": " + e.what());
        break;
      } catch (const DivergenceError& e) {
        ok = false;
        m.warnings.push_back("cloud " + std::to_string(order[i]) + ": " + e.what());
        break;
      }
      accumulate(total.encoder, g.encoder, w);
      accumulate(total.decoder, g.decoder, w);
      accumulate(total.prior, g.prior, w);
    }
    if (ok && !(total.encoder.all_finite() && total.decoder.all_finite() &&
                total.prior.all_finite())) {
      ok = false;
      m.warnings.push_back("non-finite gradient in batch starting at position " +
                           std::to_string(begin));
    }
    if (!ok) {
      ++m.skipped;
      continue;
    }
    ++state.step;
    adam_update(state.encoder, state.encoder_opt, total.encoder, state.step, cfg);
    adam_update(state.hyper.decoder, state.decoder_opt, total.decoder, state.step, cfg);
    adam_update(state.hyper.prior, state.prior_opt, total.prior, state.step, cfg);
    m.cost += batch.total;
    m.flow += batch.flow;
    m.prior += batch.prior;
    m.entropy += batch.entropy;
    ++counted;
  }
  if (counted > 0) {
    const double n = static_cast<double>(counted);
    m.cost /= n;
    m.flow /= n;
    m.prior /= n;
    m.entropy /= n;
  }
  ++state.epoch;
  state.sigma = sln::schedule_sigma(cfg.effective_schedule(), state.epoch);
  m.next_sigma = state.sigma;
  m.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return m;
}

Tensor encode_mean(const TrainState& state, const PointCloud& cloud) {
  const encoder::Posterior post = encoder::encode(state.model.encoder, state.encoder, cloud);
  return post.mean.reshaped({post.mean.size()});
}

hyper::FlowParams reconstruct_weights(const TrainState& state, const PointCloud& cloud) {
  return hyper::decode_weights(state.model.hyper, state.hyper, encode_mean(state, cloud));
}

PointCloud generate_points(const hyper::FlowParams& weights, const sln::SlnParams& sln,
                           std::size_t n, Rng& rng, const odeflow::FlowConfig& flow) {
  if (n == 0) return {};
  const Tensor prior = sln::sample_points(sln, n, rng);
  return PointCloud::from_tensor(
      odeflow::flow_forward(weights.layout, weights.flat, prior, flow));
}

PointCloud reconstruct(const TrainState& state, const PointCloud& cloud, std::size_t n_out,
                       Rng& rng, const odeflow::FlowConfig& flow) {
  if (n_out == 0) return {};
  return generate_points(reconstruct_weights(state, cloud), state.sln(), n_out, rng, flow);
}

}  // namespace hyperflow::train
