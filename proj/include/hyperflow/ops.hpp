#pragma once

#include <cstddef>
#include <span>

#include "hyperflow/tape.hpp"

// Differentiable tensor primitives. Every op records itself on the tape of its
// operands; mixing tapes throws.
namespace hyperflow {

enum class Activation { tanh, softplus, relu };

// Linear algebra.
Var matmul(const Var& a, const Var& b);     // a[n,k] * b[k,m]
Var matmul_nt(const Var& a, const Var& b);  // a[n,k] * b[m,k]^T

// Elementwise binary ops on equal shapes.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
/// a[k*n,m] * b[n,m] with b repeated over the k row blocks of a.
Var mul_tiled(const Var& a, const Var& b);
/// a[n,m] + row[1,m] broadcast over rows.
Var add_row(const Var& a, const Var& row);

/// base + sum_i coeffs[i] * terms[i], all of equal shape.
Var combine(const Var& base, std::span<const double> coeffs,
            std::span<const Var> terms);
Var scale(const Var& a, double factor);
Var add_scalar(const Var& a, double offset);
Var neg(const Var& a);

// Elementwise unary ops.
Var square(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var softplus(const Var& a);
Var relu(const Var& a);
Var activate(const Var& a, Activation act);
/// Slope of the activation expressed through its output h = act(x);
/// itself differentiable in h.
Var activation_slope(const Var& h, Activation act);
/// Gradient is passed only where lo < a < hi.
Var clamp(const Var& a, double lo, double hi);

// Reductions.
Var sum(const Var& a);
Var mean(const Var& a);
/// Row sums: [n,m] -> [n,1].
Var sum_cols(const Var& a);
/// Column-wise maximum over rows: [n,m] -> [1,m]. Ties route the gradient to
/// the first maximal row.
Var max_rows(const Var& a);

// Layout.
Var concat_cols(const Var& a, const Var& b);
Var slice_cols(const Var& a, std::size_t start, std::size_t count);
/// k vertical copies: [n,m] -> [k*n,m].
Var tile_rows(const Var& a, std::size_t k);
/// Reads `rows*cols` consecutive entries of a flat tensor starting at
/// `offset` as a [rows,cols] matrix.
Var view(const Var& flat, std::size_t offset, std::size_t rows,
         std::size_t cols);
/// For t of shape [k*n, m] (m >= k) holding k stacked blocks, returns [n,1]
/// with out[i] = sum_j t[j*n + i, j].
Var block_diagonal_sum(const Var& t, std::size_t k);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator*(double s, const Var& a) { return scale(a, s); }
inline Var operator-(const Var& a) { return neg(a); }

}  // namespace hyperflow
