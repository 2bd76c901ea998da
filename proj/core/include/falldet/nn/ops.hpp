#pragma once

#include <cstddef>
#include <span>

#include "falldet/nn/autograd.hpp"

namespace falldet {
class Rng;
}

namespace falldet::nn {

// Differentiable operators. Every function validates shapes and throws
// DimensionError naming both operands on mismatch.

/// Element-wise sum. `b` may also match a trailing suffix of `a`'s shape,
/// in which case it is broadcast over the leading dimensions.
Var add(const Var& a, const Var& b);
/// Element-wise product of equal shapes.
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);

/// a[..., m, k] x b[k, n] -> [..., m, n]; with transpose_b, b is [n, k].
Var matmul(const Var& a, const Var& b, bool transpose_b = false);
/// Batched product a[B, m, k] x b[B, k, n]; with transpose_b, b is [B, n, k].
Var bmm(const Var& a, const Var& b, bool transpose_b = false);
/// Dense layer: x[..., in] w[out, in]^T + bias[out].
Var linear(const Var& x, const Var& weight, const Var& bias);

Var reshape(const Var& a, Shape shape);
/// Axis permutation: result dim i is input dim perm[i].
Var transpose(const Var& a, std::span<const std::size_t> perm);

Var relu(const Var& a);
/// Exact (erf) GELU.
Var gelu(const Var& a);

/// Softmax along the last axis.
Var softmax(const Var& a);
/// Normalises the last axis to zero mean / unit variance, then applies gain and bias.
Var layer_norm(const Var& x, const Var& gain, const Var& bias, double eps = 1e-5);

/// 1-D convolution, stride 1, "same" zero padding.
/// x[B, C, T], w[O, C, K], bias[O] -> [B, O, T].
Var conv1d(const Var& x, const Var& w, const Var& bias);

/// Mean over one axis (the axis is removed).
Var mean(const Var& a, std::size_t axis);
/// Sum of all elements, shape {1}.
Var sum(const Var& a);
/// Concatenation along the last axis; leading dimensions must agree.
Var concat_last(const Var& a, const Var& b);

/// Inverted dropout. Identity when !training or p == 0.
Var dropout(const Var& a, double p, bool training, Rng& rng);

/// Mean softmax cross-entropy of logits[B, C] against integer labels.
Var cross_entropy(const Var& logits, std::span<const int> labels);

struct AttentionParams {
  Var wq, bq, wk, bk, wv, bv, wo, bo;  // weights [dim, dim], biases [dim]
};

/// Multi-head scaled dot-product self-attention over x[B, S, D].
/// Scale is 1/sqrt(D/heads). When `weights_out` is given it receives the
/// attention weights [B, heads, S, S].
Var multi_head_attention(const Var& x, std::size_t heads, const AttentionParams& p, Tensor* weights_out = nullptr);

}  // namespace falldet::nn
