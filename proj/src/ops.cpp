#include "hyperflow/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace hyperflow {
namespace {

using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMatrix> cmap(const Tensor& t) {
  return {t.data(), static_cast<Eigen::Index>(t.rows()),
          static_cast<Eigen::Index>(t.cols())};
}

Eigen::Map<RowMatrix> map(Tensor& t) {
  return {t.data(), static_cast<Eigen::Index>(t.rows()),
          static_cast<Eigen::Index>(t.cols())};
}

Tensor matrix_like(std::size_t rows, std::size_t cols) {
  return Tensor::uninitialized(rows, cols);
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (!a.value().same_shape(b.value())) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " +
                                shape_string(a.value().shape()) + " vs " +
                                shape_string(b.value().shape()));
  }
}

template <class Forward, class Derivative>
Var unary(const Var& a, Forward f, Derivative dfdx) {
  const Tensor& x = a.value();
  Tensor y = Tensor::uninitialized_like(x);
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  const std::size_t ia = a.id();
  return a.tape().record(std::move(y), {a},
                         [ia, dfdx](Tape& tape, std::size_t self) {
                           Tensor* ga = tape.grad_sink(ia);
                           if (!ga) return;
                           const Tensor& g = tape.grad_of(self);
                           const Tensor& xv = tape.value(ia);
                           const Tensor& yv = tape.value(self);
                           for (std::size_t i = 0; i < g.size(); ++i) {
                             (*ga)[i] += g[i] * dfdx(xv[i], yv[i]);
                           }
                         });
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double stable_softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

}  // namespace

Var matmul(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.rows()) {
    throw std::invalid_argument("matmul: inner dimensions " +
                                shape_string(av.shape()) + " * " +
                                shape_string(bv.shape()));
  }
  Tensor out = matrix_like(av.rows(), bv.cols());
  map(out).noalias() = cmap(av) * cmap(bv);
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b},
                         [ia, ib](Tape& tape, std::size_t self) {
                           const Tensor& g = tape.grad_of(self);
                           if (Tensor* ga = tape.grad_sink(ia)) {
                             map(*ga).noalias() +=
                                 cmap(g) * cmap(tape.value(ib)).transpose();
                           }
                           if (Tensor* gb = tape.grad_sink(ib)) {
                             map(*gb).noalias() +=
                                 cmap(tape.value(ia)).transpose() * cmap(g);
                           }
                         });
}

Var matmul_nt(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.cols() != bv.cols()) {
    throw std::invalid_argument("matmul_nt: inner dimensions " +
                                shape_string(av.shape()) + " * " +
                                shape_string(bv.shape()) + "^T");
  }
  // Fixed summation order over k for every entry, so a row of the result
  // depends on its input row alone, whatever the row count or alignment.
  const std::size_t n = av.rows(), m = bv.rows(), kk = av.cols();
  std::vector<double> bt(kk * m);
  for (std::size_t j = 0; j < m; ++j)
    for (std::size_t k = 0; k < kk; ++k) bt[k * m + j] = bv.data()[j * kk + k];
  Tensor out = Tensor::zeros(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    double* o = out.data() + i * m;
    const double* a_row = av.data() + i * kk;
    for (std::size_t k = 0; k < kk; ++k) {
      const double aik = a_row[k];
      const double* b_row = bt.data() + k * m;
      for (std::size_t j = 0; j < m; ++j) o[j] += aik * b_row[j];
    }
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b},
                         [ia, ib](Tape& tape, std::size_t self) {
                           const Tensor& g = tape.grad_of(self);
                           if (Tensor* ga = tape.grad_sink(ia)) {
                             map(*ga).noalias() += cmap(g) * cmap(tape.value(ib));
                           }
                           if (Tensor* gb = tape.grad_sink(ib)) {
                             map(*gb).noalias() +=
                                 cmap(g).transpose() * cmap(tape.value(ia));
                           }
                         });
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b.value()[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b},
                         [ia, ib](Tape& tape, std::size_t self) {
                           const Tensor& g = tape.grad_of(self);
                           for (std::size_t id : {ia, ib}) {
                             if (Tensor* s = tape.grad_sink(id)) {
                               for (std::size_t i = 0; i < g.size(); ++i) (*s)[i] += g[i];
                             }
                           }
                         });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b.value()[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b},
                         [ia, ib](Tape& tape, std::size_t self) {
                           const Tensor& g = tape.grad_of(self);
                           if (Tensor* s = tape.grad_sink(ia)) {
                             for (std::size_t i = 0; i < g.size(); ++i) (*s)[i] += g[i];
                           }
                           if (Tensor* s = tape.grad_sink(ib)) {
                             for (std::size_t i = 0; i < g.size(); ++i) (*s)[i] -= g[i];
                           }
                         });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Tensor out = a.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b.value()[i];
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b},
                         [ia, ib](Tape& tape, std::size_t self) {
                           const Tensor& g = tape.grad_of(self);
                           if (Tensor* s = tape.grad_sink(ia)) {
                             const Tensor& bv = tape.value(ib);
                             for (std::size_t i = 0; i < g.size(); ++i) (*s)[i] += g[i] * bv[i];
                           }
                           if (Tensor* s = tape.grad_sink(ib)) {
                             const Tensor& av = tape.value(ia);
                             for (std::size_t i = 0; i < g.size(); ++i) (*s)[i] += g[i] * av[i];
                           }
                         });
}

Var mul_tiled(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (bv.rows() == 0 || av.cols() != bv.cols() || av.rows() % bv.rows() != 0) {
    throw std::invalid_argument("mul_tiled: shapes " + shape_string(av.shape()) +
                                " and " + shape_string(bv.shape()));
  }
  const std::size_t block = bv.size(), k = av.rows() / bv.rows();
  Tensor out = Tensor::uninitialized_like(av);
  for (std::size_t j = 0; j < k; ++j) {
    const double* ap = av.data() + j * block;
    double* op = out.data() + j * block;
    for (std::size_t i = 0; i < block; ++i) op[i] = ap[i] * bv[i];
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b},
                         [ia, ib, k, block](Tape& tape, std::size_t self) {
                           const Tensor& g = tape.grad_of(self);
                           if (Tensor* s = tape.grad_sink(ia)) {
                             const Tensor& bv = tape.value(ib);
                             for (std::size_t j = 0; j < k; ++j) {
                               for (std::size_t i = 0; i < block; ++i) {
                                 (*s)[j * block + i] += g[j * block + i] * bv[i];
                               }
                             }
                           }
                           if (Tensor* s = tape.grad_sink(ib)) {
                             const Tensor& av = tape.value(ia);
                             for (std::size_t j = 0; j < k; ++j) {
                               for (std::size_t i = 0; i < block; ++i) {
                                 (*s)[i] += g[j * block + i] * av[j * block + i];
                               }
                             }
                           }
                         });
}

Var add_row(const Var& a, const Var& row) {
  const Tensor& av = a.value();
  const Tensor& rv = row.value();
  if (rv.size() != av.cols()) {
    throw std::invalid_argument("add_row: row of " + shape_string(rv.shape()) +
                                " for matrix " + shape_string(av.shape()));
  }
  Tensor out = av;
  const std::size_t n = av.rows(), m = av.cols();
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < m; ++c) out[r * m + c] += rv[c];
  }
  const std::size_t ia = a.id(), ir = row.id();
  return a.tape().record(std::move(out), {a, row},
                         [ia, ir, n, m](Tape& tape, std::size_t self) {
                           const Tensor& g = tape.grad_of(self);
                           if (Tensor* s = tape.grad_sink(ia)) {
                             for (std::size_t i = 0; i < g.size(); ++i) (*s)[i] += g[i];
                           }
                           if (Tensor* s = tape.grad_sink(ir)) {
                             for (std::size_t r = 0; r < n; ++r) {
                               for (std::size_t c = 0; c < m; ++c) (*s)[c] += g[r * m + c];
                             }
                           }
                         });
}

Var combine(const Var& base, std::span<const double> coeffs,
            std::span<const Var> terms) {
  if (coeffs.size() != terms.size()) {
    throw std::invalid_argument("combine: coefficient count mismatch");
  }
  Tensor out = base.value();
  std::vector<Var> parents{base};
  std::vector<std::size_t> ids;
  std::vector<double> used;
  for (std::size_t k = 0; k < terms.size(); ++k) {
    require_same_shape(base, terms[k], "combine");
    if (coeffs[k] == 0.0) continue;
    const Tensor& tv = terms[k].value();
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += coeffs[k] * tv[i];
    parents.push_back(terms[k]);
    ids.push_back(terms[k].id());
    used.push_back(coeffs[k]);
  }
  const std::size_t ib = base.id();
  return base.tape().record(
      std::move(out), parents,
      [ib, ids = std::move(ids), used = std::move(used)](Tape& tape,
                                                         std::size_t self) {
        const Tensor& g = tape.grad_of(self);
        if (Tensor* s = tape.grad_sink(ib)) {
          for (std::size_t i = 0; i < g.size(); ++i) (*s)[i] += g[i];
        }
        for (std::size_t k = 0; k < ids.size(); ++k) {
          if (Tensor* s = tape.grad_sink(ids[k])) {
            for (std::size_t i = 0; i < g.size(); ++i) (*s)[i] += used[k] * g[i];
          }
        }
      });
}

Var scale(const Var& a, double factor) {
  return unary(
      a, [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

Var add_scalar(const Var& a, double offset) {
  return unary(
      a, [offset](double x) { return x + offset; },
      [](double, double) { return 1.0; });
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var square(const Var& a) {
  return unary(
      a, [](double x) { return x * x; },
      [](double x, double) { return 2.0 * x; });
}

Var exp(const Var& a) {
  return unary(
      a, [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

Var log(const Var& a) {
  return unary(
      a, [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

Var tanh(const Var& a) {
  const Tensor& x = a.value();
  Tensor y = Tensor::uninitialized_like(x);
  // 1 - 2 / (e^{2x} + 1) vectorizes through Eigen's exp; saturates cleanly.
  const auto xs = Eigen::Map<const Eigen::ArrayXd>(x.data(), x.size());
  Eigen::Map<Eigen::ArrayXd>(y.data(), y.size()) =
      1.0 - 2.0 / ((2.0 * xs).exp() + 1.0);
  const std::size_t ia = a.id();
  return a.tape().record(std::move(y), {a}, [ia](Tape& tape, std::size_t self) {
    Tensor* ga = tape.grad_sink(ia);
    if (!ga) return;
    const Tensor& g = tape.grad_of(self);
    const Tensor& yv = tape.value(self);
    for (std::size_t i = 0; i < g.size(); ++i) (*ga)[i] += g[i] * (1.0 - yv[i] * yv[i]);
  });
}

Var sigmoid(const Var& a) {
  return unary(a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Var softplus(const Var& a) {
  return unary(a, stable_softplus,
               [](double x, double) { return stable_sigmoid(x); });
}

Var relu(const Var& a) {
  return unary(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Var activate(const Var& a, Activation act) {
  switch (act) {
    case Activation::tanh:
      return tanh(a);
    case Activation::softplus:
      return softplus(a);
    case Activation::relu:
      return relu(a);
  }
  throw std::invalid_argument("unknown activation");
}

Var activation_slope(const Var& h, Activation act) {
  switch (act) {
    case Activation::tanh:
      return unary(
          h, [](double y) { return 1.0 - y * y; },
          [](double y, double) { return -2.0 * y; });
    case Activation::softplus:
      // sigmoid(x) = 1 - exp(-softplus(x))
      return unary(
          h, [](double y) { return -std::expm1(-y); },
          [](double y, double) { return std::exp(-y); });
    case Activation::relu:
      return unary(
          h, [](double y) { return y > 0.0 ? 1.0 : 0.0; },
          [](double, double) { return 0.0; });
  }
  throw std::invalid_argument("unknown activation");
}

Var clamp(const Var& a, double lo, double hi) {
  return unary(
      a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Var sum(const Var& a) {
  double total = 0.0;
  for (double v : a.value().values()) total += v;
  const std::size_t ia = a.id();
  return a.tape().record(Tensor::scalar(total), {a},
                         [ia](Tape& tape, std::size_t self) {
                           Tensor* s = tape.grad_sink(ia);
                           if (!s) return;
                           const double g = tape.grad_of(self)[0];
                           for (double& v : s->values()) v += g;
                         });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

Var sum_cols(const Var& a) {
  const Tensor& av = a.value();
  const std::size_t n = av.rows(), m = av.cols();
  Tensor out = matrix_like(n, 1);
  for (std::size_t r = 0; r < n; ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < m; ++c) acc += av[r * m + c];
    out[r] = acc;
  }
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {a},
                         [ia, n, m](Tape& tape, std::size_t self) {
                           Tensor* s = tape.grad_sink(ia);
                           if (!s) return;
                           const Tensor& g = tape.grad_of(self);
                           for (std::size_t r = 0; r < n; ++r) {
                             for (std::size_t c = 0; c < m; ++c) (*s)[r * m + c] += g[r];
                           }
                         });
}

Var max_rows(const Var& a) {
  const Tensor& av = a.value();
  const std::size_t n = av.rows(), m = av.cols();
  if (n == 0) throw std::invalid_argument("max_rows: empty input");
  Tensor out = matrix_like(1, m);
  std::vector<std::size_t> argmax(m, 0);
  for (std::size_t c = 0; c < m; ++c) {
    double best = av[c];
    for (std::size_t r = 1; r < n; ++r) {
      const double v = av[r * m + c];
      if (v > best) {
        best = v;
        argmax[c] = r;
      }
    }
    out[c] = best;
  }
  const std::size_t ia = a.id();
  return a.tape().record(
      std::move(out), {a},
      [ia, m, argmax = std::move(argmax)](Tape& tape, std::size_t self) {
        Tensor* s = tape.grad_sink(ia);
        if (!s) return;
        const Tensor& g = tape.grad_of(self);
        for (std::size_t c = 0; c < m; ++c) (*s)[argmax[c] * m + c] += g[c];
      });
}

Var concat_cols(const Var& a, const Var& b) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rows() != bv.rows()) {
    throw std::invalid_argument("concat_cols: row mismatch");
  }
  const std::size_t n = av.rows(), p = av.cols(), q = bv.cols();
  Tensor out = matrix_like(n, p + q);
  for (std::size_t r = 0; r < n; ++r) {
    std::copy_n(av.data() + r * p, p, out.data() + r * (p + q));
    std::copy_n(bv.data() + r * q, q, out.data() + r * (p + q) + p);
  }
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(std::move(out), {a, b},
                         [ia, ib, n, p, q](Tape& tape, std::size_t self) {
                           const Tensor& g = tape.grad_of(self);
                           Tensor* sa = tape.grad_sink(ia);
                           Tensor* sb = tape.grad_sink(ib);
                           for (std::size_t r = 0; r < n; ++r) {
                             const double* row = g.data() + r * (p + q);
                             if (sa) {
                               for (std::size_t c = 0; c < p; ++c) (*sa)[r * p + c] += row[c];
                             }
                             if (sb) {
                               for (std::size_t c = 0; c < q; ++c) (*sb)[r * q + c] += row[p + c];
                             }
                           }
                         });
}

Var slice_cols(const Var& a, std::size_t start, std::size_t count) {
  const Tensor& av = a.value();
  const std::size_t n = av.rows(), m = av.cols();
  if (start + count > m) throw std::invalid_argument("slice_cols: out of range");
  Tensor out = matrix_like(n, count);
  for (std::size_t r = 0; r < n; ++r) {
    std::copy_n(av.data() + r * m + start, count, out.data() + r * count);
  }
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {a},
                         [ia, n, m, start, count](Tape& tape, std::size_t self) {
                           Tensor* s = tape.grad_sink(ia);
                           if (!s) return;
                           const Tensor& g = tape.grad_of(self);
                           for (std::size_t r = 0; r < n; ++r) {
                             for (std::size_t c = 0; c < count; ++c) {
                               (*s)[r * m + start + c] += g[r * count + c];
                             }
                           }
                         });
}

Var tile_rows(const Var& a, std::size_t k) {
  const Tensor& av = a.value();
  const std::size_t block = av.size();
  Tensor out = matrix_like(k * av.rows(), av.cols());
  for (std::size_t j = 0; j < k; ++j) {
    std::copy_n(av.data(), block, out.data() + j * block);
  }
  const std::size_t ia = a.id();
  return a.tape().record(std::move(out), {a},
                         [ia, k, block](Tape& tape, std::size_t self) {
                           Tensor* s = tape.grad_sink(ia);
                           if (!s) return;
                           const Tensor& g = tape.grad_of(self);
                           for (std::size_t j = 0; j < k; ++j) {
                             for (std::size_t i = 0; i < block; ++i) (*s)[i] += g[j * block + i];
                           }
                         });
}

Var view(const Var& flat, std::size_t offset, std::size_t rows,
         std::size_t cols) {
  const Tensor& fv = flat.value();
  const std::size_t count = rows * cols;
  if (offset + count > fv.size()) {
    throw std::invalid_argument("view: range exceeds flat tensor of " +
                                std::to_string(fv.size()));
  }
  Tensor out = matrix_like(rows, cols);
  std::copy_n(fv.data() + offset, count, out.data());
  const std::size_t ia = flat.id();
  return flat.tape().record(std::move(out), {flat},
                            [ia, offset, count](Tape& tape, std::size_t self) {
                              Tensor* s = tape.grad_sink(ia);
                              if (!s) return;
                              const Tensor& g = tape.grad_of(self);
                              for (std::size_t i = 0; i < count; ++i) (*s)[offset + i] += g[i];
                            });
}

Var block_diagonal_sum(const Var& t, std::size_t k) {
  const Tensor& tv = t.value();
  if (k == 0 || tv.rows() % k != 0 || tv.cols() < k) {
    throw std::invalid_argument("block_diagonal_sum: incompatible shape " +
                                shape_string(tv.shape()));
  }
  const std::size_t n = tv.rows() / k, m = tv.cols();
  Tensor out = Tensor::zeros(n, 1);
  for (std::size_t j = 0; j < k; ++j) {
    for (std::size_t i = 0; i < n; ++i) out[i] += tv[(j * n + i) * m + j];
  }
  const std::size_t ia = t.id();
  return t.tape().record(std::move(out), {t},
                         [ia, k, n, m](Tape& tape, std::size_t self) {
                           Tensor* s = tape.grad_sink(ia);
                           if (!s) return;
                           const Tensor& g = tape.grad_of(self);
                           for (std::size_t j = 0; j < k; ++j) {
                             for (std::size_t i = 0; i < n; ++i) {
                               (*s)[(j * n + i) * m + j] += g[i];
                             }
                           }
                         });
}

}  // namespace hyperflow
