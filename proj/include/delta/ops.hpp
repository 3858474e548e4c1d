#pragma once

#include "delta/tensor.hpp"
#include "delta/trace.hpp"

namespace delta {

// Elementwise; shapes must match exactly.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor gelu(const Tensor& x);

// 2-D matrix product (m×k)·(k×n).
Tensor matmul(const Tensor& a, const Tensor& b);

// x: [..., in] -> [..., out]; w: [in, out]; b: [out] or undefined for none.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

// Softmax along `axis` (negative counts from the back).
Tensor softmax(const Tensor& x, int axis);

// Normalization over the last dimension; gamma/beta: [last].
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps);

// Zero-copy view with identical element count.
Tensor reshape(const Tensor& x, std::vector<int> shape);

// 3-D transpose swapping axes 1 and 2 (copying).
Tensor transpose_12(const Tensor& x);

// Mean over one axis (removed from the shape).
Tensor mean_axis(const Tensor& x, int axis);

// Inserts a new axis of extent n at `axis`, repeating x along it.
Tensor broadcast_axis(const Tensor& x, int axis, int n);

// Concatenation along the last axis; leading dims must match.
Tensor concat_last(const Tensor& a, const Tensor& b);

Tensor sum_all(const Tensor& x);
Tensor mean_all(const Tensor& x);

// Mean squared error; target is treated as a constant.
Tensor mse_loss(const Tensor& pred, const Tensor& target);

// Scaled dot-product attention over token sequences.
// q: [b, nq, d], k/v: [b, nk, d]; scale = 1/sqrt(d/heads).
Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads,
                 ForwardContext* ctx, TraceStage stage);

// Per-position funnel-in: keys/values are the variable rows at each
// position, queries are the position's delegate row.
// k/v: [b, c, pn, d], q: [pn, d] -> [b, pn, d].
Tensor funnel_in_attention(const Tensor& k, const Tensor& v, const Tensor& q,
                           ForwardContext* ctx);

// Per-position scalar gates over variables.
// q: [b, c, pn, d], k/v: [b, pn, d] -> [b, c, pn, d].
Tensor funnel_out_gate(const Tensor& q, const Tensor& k, const Tensor& v,
                       ForwardContext* ctx);

// Degenerate single-key funnel-out: every variable row receives the
// position's delegate value verbatim (softmax over one key is 1).
// v: [b, pn, d] -> [b, c, pn, d].
Tensor funnel_out_singleton(const Tensor& v, int c, ForwardContext* ctx);

}  // namespace delta
