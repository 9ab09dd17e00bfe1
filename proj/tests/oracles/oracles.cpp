#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

namespace oracle {
namespace {

// Kronrod nodes / weights on [-1, 1] and the embedded Gauss weights.
constexpr double kX[8] = {0.991455371120812639, 0.949107912342758525, 0.864864423359769073,
                          0.741531185599394440, 0.586087235467691130, 0.405845151377397167,
                          0.207784955007898468, 0.0};
constexpr double kWK[8] = {0.022935322010529225, 0.063092092629978553, 0.104790010322250184,
                           0.140653259715525919, 0.169004726639267903, 0.190350578064785410,
                           0.204432940075298892, 0.209482141084727828};
constexpr double kWG[4] = {0.129484966168869693, 0.279705391489276668, 0.381830050505118945,
                           0.417959183673469388};

void gk15(const std::function<double(double)>& f, double a, double b, double& est, double& err) {
  const double c = 0.5 * (a + b), h = 0.5 * (b - a);
  const double fc = f(c);
  double k = kWK[7] * fc, g = kWG[3] * fc;
  for (int i = 0; i < 7; ++i) {
    const double s = f(c - h * kX[i]) + f(c + h * kX[i]);
    k += kWK[i] * s;
    if (i % 2 == 1) g += kWG[i / 2] * s;
  }
  est = h * k;
  err = std::abs(h * (k - g));
}

double adapt(const std::function<double(double)>& f, double a, double b, double tol, int depth) {
  double est = 0, err = 0;
  gk15(f, a, b, est, err);
  if (err <= tol || depth <= 0) return est;
  const double m = 0.5 * (a + b);
  return adapt(f, a, m, 0.5 * tol, depth - 1) + adapt(f, m, b, 0.5 * tol, depth - 1);
}

double act_fn(int act, double x) {
  if (act == 0) return std::tanh(x);
  if (act == 1) return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
  return x > 0 ? x : 0.0;
}

double sq(const P3& a, const P3& b) {
  double s = 0;
  for (int k = 0; k < 3; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s;
}

double dist(const Cloud& a, const Cloud& b, bool use_emd) {
  return use_emd ? emd_enumerate(a, b) : chamfer(a, b);
}

}  // namespace

double integrate(const std::function<double(double)>& f, double a, double b, double tol, int max_depth) {
  return adapt(f, a, b, tol, max_depth);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_quantile_bisect(double p) {
  if (p > 0.5) return -normal_quantile_bisect(1.0 - p);
  double lo = -40.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (normal_cdf(mid) < p ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

std::vector<double> mlp(const std::vector<std::size_t>& sizes, int act, bool activate_output,
                        const std::vector<double>& w, const std::vector<double>& x) {
  std::vector<double> h = x;
  std::size_t off = 0;
  for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
    const std::size_t in = sizes[l], out = sizes[l + 1];
    std::vector<double> next(out);
    for (std::size_t o = 0; o < out; ++o) {
      double s = w[off + in * out + o];
      for (std::size_t i = 0; i < in; ++i) s += w[off + o * in + i] * h[i];
      const bool last = l + 2 == sizes.size();
      next[o] = (!last || activate_output) ? act_fn(act, s) : s;
    }
    off += (in + 1) * out;
    h = std::move(next);
  }
  return h;
}

std::vector<double> fd_gradient(const std::function<double(const std::vector<double>&)>& f,
                                std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

double fd_jacobian_trace(const std::vector<std::size_t>& sizes, int act, const std::vector<double>& w,
                         const std::vector<double>& y, double t, double h) {
  double tr = 0;
  for (std::size_t j = 0; j < y.size(); ++j) {
    std::vector<double> a = y, b = y;
    a[j] += h;
    b[j] -= h;
    a.push_back(t);
    b.push_back(t);
    tr += (mlp(sizes, act, false, w, a)[j] - mlp(sizes, act, false, w, b)[j]) / (2 * h);
  }
  return tr;
}

std::vector<double> rk4(const std::function<std::vector<double>(const std::vector<double>&, double)>& f,
                        std::vector<double> y, double t0, double t1, int n) {
  const double h = (t1 - t0) / n;
  auto axpy = [](const std::vector<double>& a, double s, const std::vector<double>& b) {
    std::vector<double> r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] + s * b[i];
    return r;
  };
  for (int i = 0; i < n; ++i) {
    const double t = t0 + i * h;
    const auto k1 = f(y, t);
    const auto k2 = f(axpy(y, h / 2, k1), t + h / 2);
    const auto k3 = f(axpy(y, h / 2, k2), t + h / 2);
    const auto k4 = f(axpy(y, h, k3), t + h);
    for (std::size_t j = 0; j < y.size(); ++j) y[j] += h / 6 * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j]);
  }
  return y;
}

double chamfer(const Cloud& a, const Cloud& b) {
  double ab = 0, ba = 0;
  for (const P3& p : a) {
    double m = std::numeric_limits<double>::infinity();
    for (const P3& q : b) m = std::min(m, sq(p, q));
    ab += m;
  }
  for (const P3& q : b) {
    double m = std::numeric_limits<double>::infinity();
    for (const P3& p : a) m = std::min(m, sq(p, q));
    ba += m;
  }
  return ab / a.size() + ba / b.size();
}

double emd_enumerate(const Cloud& a, const Cloud& b) {
  if (a.size() != b.size() || a.size() > 9) throw std::invalid_argument("emd_enumerate: bad sizes");
  std::vector<std::size_t> perm(a.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  double best = std::numeric_limits<double>::infinity();
  do {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::sqrt(sq(a[i], b[perm[i]]));
    best = std::min(best, s);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best / a.size();
}

double jsd(const std::vector<Cloud>& s, const std::vector<Cloud>& r, int grid) {
  auto hist = [&](const std::vector<Cloud>& set) {
    std::vector<double> h(grid * grid * grid, 0.0);
    double n = 0;
    for (const Cloud& c : set) {
      for (const P3& p : c) {
        int idx[3];
        bool in = true;
        for (int k = 0; k < 3; ++k) {
          if (p[k] < -1 || p[k] > 1) in = false;
          // Voxel k covers [-1 + 2k/g, -1 + 2(k+1)/g); the top face joins the last voxel.
          int v = 0;
          while (v + 1 < grid && p[k] >= -1.0 + 2.0 * (v + 1) / grid) ++v;
          idx[k] = v;
        }
        if (!in) continue;
        h[(idx[0] * grid + idx[1]) * grid + idx[2]] += 1;
        n += 1;
      }
    }
    for (double& v : h) v /= n;
    return h;
  };
  const auto p = hist(s), q = hist(r);
  double out = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = (p[i] + q[i]) / 2;
    if (p[i] > 0) out += 0.5 * p[i] * std::log(p[i] / m);
    if (q[i] > 0) out += 0.5 * q[i] * std::log(q[i] / m);
  }
  return out;
}

double mmd(const std::vector<Cloud>& s, const std::vector<Cloud>& r, bool use_emd) {
  double total = 0;
  for (const Cloud& rc : r) {
    double m = std::numeric_limits<double>::infinity();
    for (const Cloud& sc : s) m = std::min(m, dist(sc, rc, use_emd));
    total += m;
  }
  return total / r.size();
}

double coverage(const std::vector<Cloud>& s, const std::vector<Cloud>& r, bool use_emd) {
  std::set<std::size_t> hit;
  for (const Cloud& sc : s) {
    std::size_t arg = 0;
    double m = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < r.size(); ++j) {
      const double d = dist(sc, r[j], use_emd);
      if (d < m) {
        m = d;
        arg = j;
      }
    }
    hit.insert(arg);
  }
  return static_cast<double>(hit.size()) / r.size();
}

double nn_accuracy(const std::vector<Cloud>& s, const std::vector<Cloud>& r, bool use_emd) {
  std::vector<Cloud> pool = s;
  pool.insert(pool.end(), r.begin(), r.end());
  const std::size_t n = pool.size();
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool mine = i < s.size();
    double best = std::numeric_limits<double>::infinity();
    bool best_same = false;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      const double d = dist(pool[i], pool[j], use_emd);
      const bool same = (j < s.size()) == mine;
      // Strictly closer wins; on equal distance the cross-set neighbour wins.
      if (d < best || (d == best && !same)) {
        best = d;
        best_same = same;
      }
    }
    if (best_same) ++correct;
  }
  return static_cast<double>(correct) / n;
}

double ks_statistic(std::vector<double> sample, const std::function<double(double)>& cdf) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = cdf(sample[i]);
    d = std::max({d, (i + 1) / n - f, f - i / n});
  }
  return d;
}

double ks_critical(std::size_t n, double alpha) {
  return std::sqrt(-std::log(alpha / 2.0) / 2.0) / std::sqrt(static_cast<double>(n));
}

}  // namespace oracle

namespace oracle {

std::vector<double> Uniform::many(std::size_t n, double lo, double hi) {
  std::vector<double> v(n);
  for (double& x : v) x = (*this)(lo, hi);
  return v;
}

double Uniform::normal() {
  const double u1 = 1.0 - (*this)(), u2 = (*this)();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double emd_min_cost_flow(const Cloud& a, const Cloud& b) {
  const std::size_t n = a.size();
  if (b.size() != n) throw std::invalid_argument("emd_min_cost_flow: sizes differ");
  // Nodes: 0 source, 1..n left, n+1..2n right, 2n+1 sink.
  const std::size_t src = 0, sink = 2 * n + 1, nodes = 2 * n + 2;
  struct Edge {
    std::size_t to;
    int cap;
    double cost;
  };
  std::vector<Edge> edges;
  std::vector<std::vector<std::size_t>> adj(nodes);
  auto add = [&](std::size_t u, std::size_t v, double c) {
    adj[u].push_back(edges.size());
    edges.push_back({v, 1, c});
    adj[v].push_back(edges.size());
    edges.push_back({u, 0, -c});
  };
  for (std::size_t i = 0; i < n; ++i) add(src, 1 + i, 0.0);
  for (std::size_t j = 0; j < n; ++j) add(n + 1 + j, sink, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) add(1 + i, n + 1 + j, std::sqrt(sq(a[i], b[j])));
  double total = 0;
  for (std::size_t flow = 0; flow < n; ++flow) {
    std::vector<double> d(nodes, std::numeric_limits<double>::infinity());
    std::vector<std::size_t> via(nodes, SIZE_MAX);
    d[src] = 0;
    for (std::size_t round = 0; round < nodes; ++round) {
      bool changed = false;
      for (std::size_t u = 0; u < nodes; ++u) {
        if (!std::isfinite(d[u])) continue;
        for (std::size_t e : adj[u]) {
          if (edges[e].cap > 0 && d[u] + edges[e].cost < d[edges[e].to] - 1e-15) {
            d[edges[e].to] = d[u] + edges[e].cost;
            via[edges[e].to] = e;
            changed = true;
          }
        }
      }
      if (!changed) break;
    }
    for (std::size_t v = sink; v != src;) {
      const std::size_t e = via[v];
      edges[e].cap -= 1;
      edges[e ^ 1].cap += 1;
      v = edges[e ^ 1].to;
    }
    total += d[sink];
  }
  return total / n;
}

double cnf_log_prob(const std::vector<std::size_t>& sizes, int act, const std::vector<double>& w,
                    const std::vector<double>& x, int n_steps) {
  const std::size_t d = x.size();
  auto f = [&](const std::vector<double>& s, double t) {
    std::vector<double> y(s.begin(), s.begin() + d), in = y;
    in.push_back(t);
    std::vector<double> out = mlp(sizes, act, false, w, in);
    out.push_back(fd_jacobian_trace(sizes, act, w, y, t));
    return out;
  };
  std::vector<double> s = x;
  s.push_back(0.0);
  s = rk4(f, s, 1.0, 0.0, n_steps);
  double lg = -0.5 * d * std::log(2 * M_PI);
  for (std::size_t i = 0; i < d; ++i) lg -= 0.5 * s[i] * s[i];
  return lg + s[d];
}

}  // namespace oracle
