#include <doctest.h>

#include <cmath>

#include "hyperflow/hyper.hpp"
#include "hyperflow/metrics.hpp"
#include "hyperflow/shapes.hpp"
#include "hyperflow/train.hpp"
#include "support.hpp"

using namespace hyperflow;
using namespace hyperflow::hyper;
using support::fixture;
using support::Json;

namespace {

HyperSpec fixture_spec(const Json& in) {
  HyperSpec s;
  s.latent_dim = in["latent_dim"];
  if (in.contains("target_layers")) s.target.layer_sizes = in["target_layers"].get<std::vector<std::size_t>>();
  if (in.contains("decoder_hidden")) s.decoder_hidden = in["decoder_hidden"].get<std::vector<std::size_t>>();
  if (in.contains("prior_hidden")) s.prior_hidden = in["prior_hidden"].get<std::vector<std::size_t>>();
  return s;
}

HyperSpec tiny_spec() {
  HyperSpec s;
  s.latent_dim = 3;
  s.target.layer_sizes = {4, 8, 3};
  s.decoder_hidden = {16};
  s.prior_hidden = {8};
  return s;
}

odeflow::FlowConfig rk4(int n) {
  odeflow::FlowConfig c;
  c.n_steps = n;
  return c;
}

double normal_logpdf(const Tensor& z) {
  double s = -0.5 * z.size() * std::log(2 * M_PI);
  for (double v : z.values()) s -= 0.5 * v * v;
  return s;
}

}  // namespace

TEST_SUITE("hyper") {

TEST_CASE("zero decoder weights emit the final bias") {
  const HyperSpec spec = tiny_spec();
  Rng rng(1);
  HyperParams hp = init_hyper(spec, rng);
  const MlpSpec dec = spec.decoder();
  const std::size_t last = dec.layer_count() - 1;
  Tensor bias(std::vector<std::size_t>{dec.output_dim()});
  for (std::size_t i = 0; i < bias.size(); ++i) bias[i] = hp.decoder[dec.bias_offset(last) + i];
  for (std::size_t i = 0; i < dec.bias_offset(last); ++i) hp.decoder[i] = 0.0;
  for (int k = 0; k < 5; ++k) {
    const Tensor z = Tensor::matrix(1, 3, rng.normals(3));
    const FlowParams fp = decode_weights(spec, hp, z);
    CHECK(fp.flat == bias);
    CHECK(fp.layout == spec.target);
  }
}

TEST_CASE("distinct codes decode to distinct weights") {
  const Json& f = fixture("hyper.decode_distinct");
  const HyperSpec spec = fixture_spec(f["inputs"]);
  const HyperParams hp{Tensor::vector(support::doubles(f["inputs"]["decoder"])),
                       Tensor::zeros(1, spec.prior_dynamics().parameter_count())};
  const FlowParams a = decode_weights(spec, hp, support::row(support::doubles(f["inputs"]["z1"])));
  const FlowParams b = decode_weights(spec, hp, support::row(support::doubles(f["inputs"]["z2"])));
  const auto ta = support::doubles(f["expected"]["theta1"]), tb = support::doubles(f["expected"]["theta2"]);
  CHECK(support::rel_error(a.flat.to_vector(), ta, 1.0) < 1e-12);
  CHECK(support::rel_error(b.flat.to_vector(), tb, 1.0) < 1e-12);
  CHECK(a.flat != b.flat);
}

TEST_CASE("decoder gradient matches the finite-difference fixture") {
  const Json& f = fixture("hyper.decode_fd_slice");
  const HyperSpec spec = fixture_spec(f["inputs"]);
  Tape tape;
  const Var dec = tape.leaf(Tensor::vector(support::doubles(f["inputs"]["decoder"])));
  const Var z = tape.constant(support::row(support::doubles(f["inputs"]["z"])));
  const Var proj = tape.constant(support::row(support::doubles(f["inputs"]["projection"])));
  const Tensor g = tape.grad(sum(mul(decode_weights(spec, dec, z), proj)), {dec})[0];
  std::vector<double> slice;
  for (const Json& k : f["inputs"]["slice"]) slice.push_back(g[k.get<std::size_t>()]);
  CHECK(support::rel_error(slice, support::doubles(f["expected"]["grad"])) <
        f["tolerance"]["relative"].get<double>());
}

TEST_CASE("decoder is continuous") {
  const HyperSpec spec = tiny_spec();
  Rng rng(2);
  const HyperParams hp = init_hyper(spec, rng);
  const Tensor z = Tensor::matrix(1, 3, {0.2, -0.4, 0.9});
  const Tensor base = decode_weights(spec, hp, z).flat;
  double prev_ratio = 0;
  for (double d : {1e-1, 1e-2, 1e-3, 1e-4, 1e-5}) {
    Tensor zd = z;
    zd[1] += d;
    const Tensor moved = decode_weights(spec, hp, zd).flat;
    double n = 0;
    for (std::size_t i = 0; i < base.size(); ++i) n += std::pow(moved[i] - base[i], 2);
    const double ratio = std::sqrt(n) / d;
    // Piecewise linear decoder: the difference quotient stays bounded.
    CHECK(ratio < 100);
    if (d < 1e-1) CHECK(std::sqrt(n) < 100 * d);
    prev_ratio = ratio;
  }
  CHECK(prev_ratio > 0);
}

TEST_CASE("identity latent flow") {
  HyperSpec spec = tiny_spec();
  spec.latent_dim = 2;
  Rng rng(3);
  HyperParams hp = init_hyper(spec, rng);
  hp.prior.fill(0.0);
  const auto cfg = latent_flow_config(spec, rk4(10));
  CHECK(prior_flow_logprob(spec, hp, Tensor::zeros(1, 2), cfg) ==
        doctest::Approx(-std::log(2 * M_PI)).epsilon(1e-15));
  for (int k = 0; k < 100; ++k) {
    const Tensor z = Tensor::matrix(1, 2, rng.normals(2));
    CHECK(prior_flow_logprob(spec, hp, z, cfg) == doctest::Approx(normal_logpdf(z)).epsilon(1e-14));
  }
  Rng a(5), b(5);
  const Tensor z = sample_latent(spec, hp, a, cfg);
  const std::vector<double> w{b.normal(), b.normal()};
  CHECK(z[0] == w[0]);
  CHECK(z[1] == w[1]);
}

TEST_CASE("sampling is reproducible") {
  const HyperSpec spec = tiny_spec();
  Rng init(4);
  const HyperParams hp = init_hyper(spec, init);
  Rng a(9), b(9);
  CHECK(sample_object(spec, hp, a, rk4(10)).flat == sample_object(spec, hp, b, rk4(10)).flat);
}

TEST_CASE("latent flow density integrates to one") {
  const Json& f = fixture("hyper.prior_grid_density");
  const auto& in = f["inputs"];
  const HyperSpec spec = fixture_spec(in);
  const HyperParams hp{Tensor::zeros(1, spec.decoder().parameter_count()),
                       Tensor::vector(support::doubles(in["prior"]))};
  REQUIRE(spec.prior_trace_mode() == TraceMode::exact);
  const auto cfg = latent_flow_config(spec, rk4(in["n_steps"]));
  const int grid = in["grid"];
  const double half = in["half_width"], h = 2 * half / grid;
  Tensor z = Tensor::zeros(grid * grid, 2);
  for (int i = 0; i < grid; ++i)
    for (int j = 0; j < grid; ++j) {
      z.at(i * grid + j, 0) = -half + (i + 0.5) * h;
      z.at(i * grid + j, 1) = -half + (j + 0.5) * h;
    }
  Tape tape;
  const Var lp = prior_flow_logprob(spec, tape.constant(hp.prior), tape.constant(z), cfg);
  double s = 0;
  for (double v : lp.value().values()) s += std::exp(v);
  INFO("integral " << s * h * h);
  CHECK(std::abs(s * h * h - f["expected"]["integral"].get<double>()) < f["tolerance"]["integral"].get<double>());
  std::size_t k = 0;
  for (const Json& p : in["probe_points"]) {
    const double v = prior_flow_logprob(spec, hp, Tensor::matrix(1, 2, support::doubles(p)), cfg);
    CHECK(std::abs(v - f["expected"]["probe_log_prob"][k++].get<double>()) < f["tolerance"]["pointwise"].get<double>());
  }
}

TEST_CASE("flow cost is differentiable through the decoder") {
  const HyperSpec spec = tiny_spec();
  Rng rng(6);
  const HyperParams hp = init_hyper(spec, rng, 1.0);
  const Tensor z = Tensor::matrix(1, 3, {0.5, -0.3, 0.2});
  const Tensor x = sln::sample_points({0, 0.3, 3}, 6, rng);
  const auto prior = odeflow::sln_prior({0, 0.5, 3});
  auto cost = [&](const Tensor& dec) {
    Tape t;
    const Var theta = decode_weights(spec, t.constant(dec), t.constant(z));
    return odeflow::flow_cost(spec.target, theta, t.constant(x), prior, rk4(5)).value().item();
  };
  Tape tape;
  const Var dec = tape.leaf(hp.decoder);
  const Var theta = decode_weights(spec, dec, tape.constant(z));
  const Tensor g = tape.grad(odeflow::flow_cost(spec.target, theta, tape.constant(x), prior, rk4(5)), {dec})[0];
  double norm = 0;
  for (double v : g.values()) {
    CHECK(std::isfinite(v));
    norm += v * v;
  }
  CHECK(norm > 0);
  std::vector<double> got, fd;
  for (std::size_t i = 0; i < g.size(); i += 7) {
    Tensor up = hp.decoder, down = hp.decoder;
    up[i] += 1e-6;
    down[i] -= 1e-6;
    got.push_back(g[i]);
    fd.push_back((cost(up) - cost(down)) / 2e-6);
  }
  CHECK(support::rel_error(got, fd) < 1e-3);
}

TEST_CASE("two trained classes decode from their latent modes") {
  const Json& f = fixture("hyper.two_class_sampling");
  const auto& in = f["inputs"];
  train::ModelSpec model = train::ModelSpec::with_latent_dim(in["latent_dim"]);
  model.encoder.point_layers = {3, 32, 64};
  model.hyper.target.layer_sizes = {4, 16, 16, 3};
  model.hyper.decoder_hidden = {64};
  model.hyper.prior_hidden = {32};
  train::TrainConfig cfg;
  cfg.epochs = in["epochs"];
  cfg.batch_size = 4;
  cfg.points_per_cloud = in["points"];
  cfg.learning_rate = 3e-3;
  cfg.seed = in["seed"];
  cfg.schedule = {1.0, in["sigma_end"], cfg.epochs};
  cfg.flow.n_steps = 6;
  cfg.prior_flow.n_steps = 6;
  cfg.weights.prior = cfg.weights.entropy = 1.0 / cfg.points_per_cloud;

  const shapes::Shape classes[2] = {shapes::parse_shape(in["shapes"][0]), shapes::parse_shape(in["shapes"][1])};
  Rng data(cfg.seed + 1);
  std::vector<PointCloud> ds;
  for (int c = 0; c < 2; ++c)
    for (int i = 0; i < in["clouds_per_shape"].get<int>(); ++i)
      ds.push_back(shapes::sample_shape(classes[c], cfg.points_per_cloud, 0.0, data));
  train::TrainState st = train::init_state(model, cfg);
  for (int e = 0; e < cfg.epochs; ++e) train::train_epoch(st, ds, cfg);

  // Draws alternate between the classes; each comes from the posterior of a
  // random training cloud of that class.
  const PointCloud ref[2] = {shapes::sample_shape(classes[0], 512, 0.0, data),
                             shapes::sample_shape(classes[1], 512, 0.0, data)};
  const int per_class = in["clouds_per_shape"];
  const int draws = in["draws"];
  int correct = 0;
  Rng rng(cfg.seed + 2);
  for (int d = 0; d < draws; ++d) {
    const int mode = d % 2;
    const auto pick = static_cast<std::size_t>(rng.uniform() * per_class);
    const encoder::Posterior post = encoder::encode(model.encoder, st.encoder, ds[mode * per_class + pick]);
    Tensor z = Tensor::zeros(1, model.hyper.latent_dim);
    for (std::size_t k = 0; k < z.size(); ++k) z[k] = post.mean[k] + std::exp(0.5 * post.logvar[k]) * rng.normal();
    const FlowParams fp = decode_weights(model.hyper, st.hyper, z.reshaped({z.size()}));
    const PointCloud out = train::generate_points(fp, st.sln(), 512, rng, cfg.flow);
    correct += metrics::chamfer(out, ref[mode]) < metrics::chamfer(out, ref[1 - mode]);
  }
  const double fraction = static_cast<double>(correct) / draws;
  MESSAGE("two-class fraction " << fraction);
  CHECK(fraction >= f["expected"]["min_fraction"].get<double>());
}

}  // TEST_SUITE
