#pragma once

#include <cstddef>
#include <vector>

#include "tbs/layers.hpp"
#include "tbs/tape.hpp"

// Differentiable primitives. Each records its output on the tape together with
// an analytical backward. Matrices are 2-D row-major tensors; "rows" are
// pixels wherever features are involved.
namespace tbs::ops {

inline constexpr double kCosineEps = 1e-8;
inline constexpr double kBceClamp = 1e-7;
inline constexpr double kLayerNormEps = 1e-5;

// C = A B for A: m x k, B: k x n.
template <typename T>
Var matmul(Tape<T>& t, Var a, Var b);

// C = A B^T for A: m x k, B: n x k.
template <typename T>
Var matmul_nt(Tape<T>& t, Var a, Var b);

template <typename T>
Var transpose(Tape<T>& t, Var a);

// Same data, new shape.
template <typename T>
Var reshape(Tape<T>& t, Var a, Shape shape);

template <typename T>
Var add(Tape<T>& t, Var a, Var b);

template <typename T>
Var sub(Tape<T>& t, Var a, Var b);

template <typename T>
Var mul(Tape<T>& t, Var a, Var b);

template <typename T>
Var scale(Tape<T>& t, Var a, T s);

// a * m elementwise, m treated as a constant.
template <typename T>
Var mul_const(Tape<T>& t, Var a, const Tensor<T>& m);

// a + c elementwise, c treated as a constant.
template <typename T>
Var add_const(Tape<T>& t, Var a, const Tensor<T>& c);

// Row-wise softmax with per-row max subtraction.
template <typename T>
Var softmax_rows(Tape<T>& t, Var m);

// (v - mean) / sqrt(var + eps) over every element, population variance, no affine.
template <typename T>
Var layer_norm(Tape<T>& t, Var v, T eps = T(kLayerNormEps));

// out[i] = <A_i, B_i> / (max(|A_i|, eps) max(|B_i|, eps)); output shape [n].
template <typename T>
Var cosine_rows(Tape<T>& t, Var a, Var b, T eps = T(kCosineEps));

template <typename T>
Var sigmoid(Tape<T>& t, Var x);

template <typename T>
Var relu(Tape<T>& t, Var x);

// X W^T + bias for X: n x in.
template <typename T>
Var linear(Tape<T>& t, const LinearParams<T>& p, Var x);

// Cross-correlation of a C x H x W input with a 3x3 kernel, padding 1.
// Output extent ceil(H / stride).
template <typename T>
Var conv2d(Tape<T>& t, const ConvParams<T>& p, Var x);

// Mean binary cross entropy; predictions clamped to [kBceClamp, 1 - kBceClamp]
// (no gradient through clamped entries). Targets are constants.
template <typename T>
Var bce_loss(Tape<T>& t, Var p, const Tensor<T>& y);

// out[n, c] = s[n] * x[n, c].
template <typename T>
Var scale_rows(Tape<T>& t, Var x, Var s);

// [a | b] for a: n x p, b: n x q.
template <typename T>
Var concat_cols(Tape<T>& t, Var a, Var b);

// Vertical stack of matrices with equal column count.
template <typename T>
Var concat_rows(Tape<T>& t, const std::vector<Var>& parts);

// x[indices] for x: n x c.
template <typename T>
Var gather_rows(Tape<T>& t, Var x, const std::vector<std::size_t>& indices);

// Scalar sum of all entries.
template <typename T>
Var sum(Tape<T>& t, Var x);

// Scalar sum of x * w with constant w.
template <typename T>
Var weighted_sum(Tape<T>& t, Var x, const Tensor<T>& w);

}  // namespace tbs::ops
