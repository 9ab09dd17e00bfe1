#include "hyperflow/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <stdexcept>
#include <string>

namespace hyperflow::metrics {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_nonempty(const PointCloud& a, const char* what) {
  if (a.empty()) throw std::invalid_argument(std::string(what) + ": empty point cloud");
}

void require_nonempty(const CloudSet& s, const char* what) {
  if (s.empty()) throw std::invalid_argument(std::string(what) + ": empty cloud set");
}

double directed(const PointCloud& a, const PointCloud& b) {
  double total = 0.0;
  for (const Point3& p : a.points) {
    double best = kInf;
    for (const Point3& q : b.points) best = std::min(best, squared_distance(p, q));
    total += best;
  }
  return total / static_cast<double>(a.size());
}

std::vector<double> cost_matrix(const PointCloud& a, const PointCloud& b) {
  const std::size_t n = a.size();
  std::vector<double> c(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) c[i * n + j] = std::sqrt(squared_distance(a.points[i], b.points[j]));
  }
  return c;
}

// Shortest augmenting path Hungarian method (potentials), O(n^3).
double assignment_cost(const std::vector<double>& c, std::size_t n) {
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = c[(i0 - 1) * n + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  double total = 0.0;
  for (std::size_t j = 1; j <= n; ++j) total += c[(p[j] - 1) * n + (j - 1)];
  return total;
}

double log_sum_exp(const double* x, std::size_t n, std::size_t stride) {
  double m = -kInf;
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, x[i * stride]);
  if (m == -kInf) return m;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(x[i * stride] - m);
  return m + std::log(s);
}

// Log-domain Sinkhorn with uniform marginals, then the rounding step of
// Altschuler, Weed and Rigollet so the plan has the exact marginals.
double sinkhorn_cost(const std::vector<double>& c, std::size_t n) {
  const double eps = kSinkhornEpsilon;
  const double log_w = -std::log(static_cast<double>(n));
  std::vector<double> f(n, 0.0), g(n, 0.0), tmp(n * n);
  for (int it = 0; it < kSinkhornIterations; ++it) {
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) tmp[j] = (g[j] - c[i * n + j]) / eps;
      f[i] = eps * (log_w - log_sum_exp(tmp.data(), n, 1));
    }
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t i = 0; i < n; ++i) tmp[i] = (f[i] - c[i * n + j]) / eps;
      g[j] = eps * (log_w - log_sum_exp(tmp.data(), n, 1));
    }
  }
  std::vector<double> plan(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) plan[i * n + j] = std::exp((f[i] + g[j] - c[i * n + j]) / eps);
  }
  const double w = 1.0 / static_cast<double>(n);
  // Scale rows, then columns, down to their targets.
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) row += plan[i * n + j];
    const double k = row > w ? w / row : 1.0;
    for (std::size_t j = 0; j < n; ++j) plan[i * n + j] *= k;
  }
  for (std::size_t j = 0; j < n; ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < n; ++i) col += plan[i * n + j];
    const double k = col > w ? w / col : 1.0;
    for (std::size_t i = 0; i < n; ++i) plan[i * n + j] *= k;
  }
  std::vector<double> er(n), ec(n);
  double deficit = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < n; ++j) row += plan[i * n + j];
    er[i] = std::max(w - row, 0.0);
    deficit += er[i];
  }
  for (std::size_t j = 0; j < n; ++j) {
    double col = 0.0;
    for (std::size_t i = 0; i < n; ++i) col += plan[i * n + j];
    ec[j] = std::max(w - col, 0.0);
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double p = plan[i * n + j];
      if (deficit > 0.0) p += er[i] * ec[j] / deficit;
      total += p * c[i * n + j];
    }
  }
  return total;
}

}  // namespace

double chamfer(const PointCloud& a, const PointCloud& b) {
  require_nonempty(a, "chamfer");
  require_nonempty(b, "chamfer");
  return directed(a, b) + directed(b, a);
}

EmdMode default_emd_mode(std::size_t n) {
  return n <= kExactEmdMaxPoints ? EmdMode::exact_assignment : EmdMode::sinkhorn;
}

double emd(const PointCloud& a, const PointCloud& b, EmdMode mode) {
  if (a.size() != b.size()) {
    throw std::invalid_argument("emd needs clouds of equal size, got " + std::to_string(a.size()) +
                                " and " + std::to_string(b.size()));
  }
  require_nonempty(a, "emd");
  const std::size_t n = a.size();
  const std::vector<double> c = cost_matrix(a, b);
  if (mode == EmdMode::exact_assignment) return assignment_cost(c, n) / static_cast<double>(n);
  return sinkhorn_cost(c, n);
}

double cloud_distance(const PointCloud& a, const PointCloud& b, Distance d) {
  return d == Distance::cd ? chamfer(a, b) : emd(a, b, default_emd_mode(a.size()));
}

double jsd(const CloudSet& s, const CloudSet& r, int grid) {
  require_nonempty(s, "jsd");
  require_nonempty(r, "jsd");
  if (grid < 1) throw std::invalid_argument("jsd grid must be >= 1");
  const std::size_t g = static_cast<std::size_t>(grid);
  auto histogram = [&](const CloudSet& set, const char* label) {
    std::vector<double> h(g * g * g, 0.0);
    double total = 0.0;
    for (std::size_t c = 0; c < set.size(); ++c) {
      std::size_t inside = 0;
      for (const Point3& p : set[c].points) {
        std::size_t idx[3];
        bool ok = true;
        for (int k = 0; k < 3; ++k) {
          if (!(p[k] >= -1.0 && p[k] <= 1.0)) {
            ok = false;
            break;
          }
          const auto b = static_cast<std::size_t>((p[k] + 1.0) * 0.5 * static_cast<double>(g));
          idx[k] = std::min(b, g - 1);
        }
        if (!ok) continue;
        h[(idx[0] * g + idx[1]) * g + idx[2]] += 1.0;
        ++inside;
      }
      if (inside == 0) {
        throw std::invalid_argument(std::string("jsd: ") + label + " cloud " + std::to_string(c) +
                                    " has no point inside [-1, 1]^3");
      }
      total += static_cast<double>(inside);
    }
    for (double& v : h) v /= total;
    return h;
  };
  const std::vector<double> p = histogram(s, "first-set");
  const std::vector<double> q = histogram(r, "second-set");
  double kl_p = 0.0, kl_q = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double m = 0.5 * (p[i] + q[i]);
    if (p[i] > 0.0) kl_p += p[i] * std::log(p[i] / m);
    if (q[i] > 0.0) kl_q += q[i] * std::log(q[i] / m);
  }
  return std::clamp(0.5 * (kl_p + kl_q), 0.0, std::log(2.0));
}

std::vector<std::vector<double>> distance_matrix(const CloudSet& a, const CloudSet& b, Distance d) {
  std::vector<std::vector<double>> m(a.size(), std::vector<double>(b.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) m[i][j] = cloud_distance(a[i], b[j], d);
  }
  return m;
}

double mmd_from(const std::vector<std::vector<double>>& sr) {
  if (sr.empty() || sr[0].empty()) throw std::invalid_argument("mmd: empty cloud set");
  double total = 0.0;
  for (std::size_t j = 0; j < sr[0].size(); ++j) {
    double best = kInf;
    for (const auto& row : sr) best = std::min(best, row[j]);
    total += best;
  }
  return total / static_cast<double>(sr[0].size());
}

double coverage_from(const std::vector<std::vector<double>>& sr) {
  if (sr.empty() || sr[0].empty()) throw std::invalid_argument("coverage: empty cloud set");
  std::set<std::size_t> matched;
  for (const auto& row : sr) {
    matched.insert(static_cast<std::size_t>(std::min_element(row.begin(), row.end()) - row.begin()));
  }
  return static_cast<double>(matched.size()) / static_cast<double>(sr[0].size());
}

NnResult nn_accuracy_from(const std::vector<std::vector<double>>& ss,
                          const std::vector<std::vector<double>>& rr,
                          const std::vector<std::vector<double>>& sr) {
  const std::size_t n = ss.size();
  if (n == 0 || rr.size() != n || sr.size() != n) {
    throw std::invalid_argument("1-NN accuracy needs two nonempty sets of equal size");
  }
  if (n == 1) throw std::invalid_argument("1-NN accuracy needs at least two clouds per set");
  NnResult res;
  std::size_t correct = 0;
  // Element i of one set: same-set distances `same`, cross-set distances `cross`.
  auto classify = [&](auto same, auto cross, std::size_t i) {
    double best_same = kInf, best_cross = kInf;
    for (std::size_t k = 0; k < n; ++k) {
      if (k != i) best_same = std::min(best_same, same(k));
      best_cross = std::min(best_cross, cross(k));
    }
    if (best_same == best_cross) ++res.ties;
    if (std::min(best_same, best_cross) == 0.0) ++res.zero_distance;
    if (best_same < best_cross) ++correct;
  };
  for (std::size_t i = 0; i < n; ++i) {
    classify([&](std::size_t k) { return ss[i][k]; }, [&](std::size_t k) { return sr[i][k]; }, i);
  }
  for (std::size_t j = 0; j < n; ++j) {
    classify([&](std::size_t k) { return rr[j][k]; }, [&](std::size_t k) { return sr[k][j]; }, j);
  }
  res.accuracy = static_cast<double>(correct) / static_cast<double>(2 * n);
  return res;
}

double mmd(const CloudSet& s, const CloudSet& r, Distance d) {
  require_nonempty(s, "mmd");
  require_nonempty(r, "mmd");
  return mmd_from(distance_matrix(s, r, d));
}

double coverage(const CloudSet& s, const CloudSet& r, Distance d) {
  require_nonempty(s, "coverage");
  require_nonempty(r, "coverage");
  return coverage_from(distance_matrix(s, r, d));
}

NnResult nn_accuracy(const CloudSet& s, const CloudSet& r, Distance d) {
  if (s.size() != r.size()) {
    throw std::invalid_argument("1-NN accuracy needs sets of equal size, got " +
                                std::to_string(s.size()) + " and " + std::to_string(r.size()));
  }
  return nn_accuracy_from(distance_matrix(s, s, d), distance_matrix(r, r, d),
                          distance_matrix(s, r, d));
}

MetricReport evaluate(const CloudSet& generated, const CloudSet& reference, int grid) {
  require_nonempty(generated, "evaluate");
  require_nonempty(reference, "evaluate");
  const std::size_t n = reference.front().size();
  for (std::size_t i = 0; i < generated.size(); ++i) {
    if (generated[i].size() != n) {
      throw std::invalid_argument("generated cloud " + std::to_string(i) + " has " +
                                  std::to_string(generated[i].size()) + " points, expected " +
                                  std::to_string(n));
    }
  }
  for (std::size_t i = 0; i < reference.size(); ++i) {
    if (reference[i].size() != n) {
      throw std::invalid_argument("reference cloud " + std::to_string(i) + " has " +
                                  std::to_string(reference[i].size()) + " points, expected " +
                                  std::to_string(n));
    }
  }
  MetricReport rep;
  rep.jsd = jsd(generated, reference, grid);
  const auto sr_cd = distance_matrix(generated, reference, Distance::cd);
  const auto sr_emd = distance_matrix(generated, reference, Distance::emd);
  rep.mmd_cd = mmd_from(sr_cd);
  rep.mmd_emd = mmd_from(sr_emd);
  rep.cov_cd = coverage_from(sr_cd);
  rep.cov_emd = coverage_from(sr_emd);
  if (generated.size() == reference.size() && generated.size() > 1) {
    const NnResult cd = nn_accuracy_from(distance_matrix(generated, generated, Distance::cd),
                                         distance_matrix(reference, reference, Distance::cd), sr_cd);
    const NnResult em = nn_accuracy_from(distance_matrix(generated, generated, Distance::emd),
                                         distance_matrix(reference, reference, Distance::emd), sr_emd);
    rep.nn_1 = cd.accuracy;
    rep.nn_1_emd = em.accuracy;
    rep.nn_1_ties = cd.ties;
    rep.nn_1_zero_distance = cd.zero_distance;
  } else {
    rep.nn_1 = rep.nn_1_emd = std::numeric_limits<double>::quiet_NaN();
  }
  return rep;
}

}  // namespace hyperflow::metrics
