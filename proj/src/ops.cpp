#include "delta/ops.hpp"

#include <cmath>
#include <initializer_list>

#include "delta/kernels.hpp"

namespace delta {

namespace {

using detail::TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;

bool want_tape(std::initializer_list<const Tensor*> inputs) {
  if (!grad_enabled()) return false;
  for (const Tensor* t : inputs)
    if (t->defined() && t->requires_grad()) return true;
  return false;
}

double* ensure_grad(const NodePtr& node) {
  if (node->grad.empty())
    node->grad = Buffer(static_cast<std::size_t>(node->numel()), 0.0);
  return node->grad.data();
}

// Grad target for a node: its own grad buffer if it participates in the
// graph, otherwise a throwaway sink the kernel can write into.
double* grad_sink(const NodePtr& node, Buffer& scratch) {
  if (node->requires_grad) return ensure_grad(node);
  if (scratch.empty())
    scratch = Buffer(static_cast<std::size_t>(node->numel()), 0.0);
  return scratch.data();
}

void require_defined(const Tensor& t, const char* op) {
  if (!t.defined())
    throw ContractError(std::string(op) + ": undefined tensor operand");
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shapes disagree: " +
                     shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

long long outer_extent(const std::vector<int>& shape, int axis) {
  long long n = 1;
  for (int i = 0; i < axis; ++i) n *= shape[static_cast<std::size_t>(i)];
  return n;
}

long long inner_extent(const std::vector<int>& shape, int axis) {
  long long n = 1;
  for (std::size_t i = static_cast<std::size_t>(axis) + 1; i < shape.size();
       ++i)
    n *= shape[i];
  return n;
}

int normalize_axis(int axis, int ndim, const char* op) {
  int a = axis < 0 ? axis + ndim : axis;
  if (a < 0 || a >= ndim)
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) +
                     " out of range for rank " + std::to_string(ndim));
  return a;
}

void record_rows(ForwardContext* ctx, TraceStage stage, const double* probs,
                 int b, int heads, int nq, int nk) {
  if (!ctx || !ctx->trace || !ctx->trace->enabled) return;
  for (int bi = 0; bi < b; ++bi)
    for (int h = 0; h < heads; ++h)
      for (int qi = 0; qi < nq; ++qi) {
        TraceEntry e;
        e.layer = ctx->layer;
        e.stage = stage;
        e.batch = bi;
        e.head = h;
        e.position = qi;
        const double* row =
            probs + ((static_cast<std::size_t>(bi) * heads + h) * nq + qi) * nk;
        e.weights.assign(row, row + nk);
        ctx->trace->entries.push_back(std::move(e));
      }
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  require_defined(a, "add");
  require_defined(b, "add");
  require_same_shape(a, b, "add");
  Tensor out = Tensor::zeros(a.shape());
  std::size_t n = static_cast<std::size_t>(a.numel());
  kern::vadd(n, a.data(), b.data(), out.data());
  if (want_tape({&a, &b})) {
    out.set_requires_grad(true);
    auto an = a.node_, bn = b.node_, on = out.node_;
    Tape::instance().push(on, [an, bn, on, n] {
      const double* g = on->grad.data();
      if (an->requires_grad) kern::vacc(n, g, ensure_grad(an));
      if (bn->requires_grad) kern::vacc(n, g, ensure_grad(bn));
    });
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  require_defined(a, "sub");
  require_defined(b, "sub");
  require_same_shape(a, b, "sub");
  Tensor out = Tensor::zeros(a.shape());
  std::size_t n = static_cast<std::size_t>(a.numel());
  kern::vsub(n, a.data(), b.data(), out.data());
  if (want_tape({&a, &b})) {
    out.set_requires_grad(true);
    auto an = a.node_, bn = b.node_, on = out.node_;
    Tape::instance().push(on, [an, bn, on, n] {
      const double* g = on->grad.data();
      if (an->requires_grad) kern::vacc(n, g, ensure_grad(an));
      if (bn->requires_grad) kern::vacc_scaled(n, g, -1.0, ensure_grad(bn));
    });
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_defined(a, "mul");
  require_defined(b, "mul");
  require_same_shape(a, b, "mul");
  Tensor out = Tensor::zeros(a.shape());
  std::size_t n = static_cast<std::size_t>(a.numel());
  kern::vmul(n, a.data(), b.data(), out.data());
  if (want_tape({&a, &b})) {
    out.set_requires_grad(true);
    auto an = a.node_, bn = b.node_, on = out.node_;
    Tape::instance().push(on, [an, bn, on, n] {
      const double* g = on->grad.data();
      Buffer tmp(n, 0.0);
      if (an->requires_grad) {
        kern::vmul(n, g, bn->data->data(), tmp.data());
        kern::vacc(n, tmp.data(), ensure_grad(an));
      }
      if (bn->requires_grad) {
        kern::vmul(n, g, an->data->data(), tmp.data());
        kern::vacc(n, tmp.data(), ensure_grad(bn));
      }
    });
  }
  return out;
}

Tensor scale(const Tensor& a, double s) {
  require_defined(a, "scale");
  Tensor out = Tensor::zeros(a.shape());
  std::size_t n = static_cast<std::size_t>(a.numel());
  kern::vscale(n, a.data(), s, out.data());
  if (want_tape({&a})) {
    out.set_requires_grad(true);
    auto an = a.node_, on = out.node_;
    Tape::instance().push(on, [an, on, n, s] {
      kern::vacc_scaled(n, on->grad.data(), s, ensure_grad(an));
    });
  }
  return out;
}

Tensor gelu(const Tensor& x) {
  require_defined(x, "gelu");
  Tensor out = Tensor::zeros(x.shape());
  std::size_t n = static_cast<std::size_t>(x.numel());
  kern::gelu_fwd(n, x.data(), out.data());
  if (want_tape({&x})) {
    out.set_requires_grad(true);
    auto xn = x.node_, on = out.node_;
    Tape::instance().push(on, [xn, on, n] {
      kern::gelu_bwd_acc(n, xn->data->data(), on->grad.data(),
                         ensure_grad(xn));
    });
  }
  return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_defined(a, "matmul");
  require_defined(b, "matmul");
  if (a.ndim() != 2 || b.ndim() != 2)
    throw ShapeError("matmul: expects rank-2 operands, got " +
                     shape_str(a.shape()) + " and " + shape_str(b.shape()));
  if (a.dim(1) != b.dim(0))
    throw ShapeError("matmul: inner dimensions disagree: " +
                     shape_str(a.shape()) + " · " + shape_str(b.shape()));
  int m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out = Tensor::zeros({m, n});
  kern::matmul_nn(m, k, n, a.data(), b.data(), out.data());
  if (want_tape({&a, &b})) {
    out.set_requires_grad(true);
    auto an = a.node_, bn = b.node_, on = out.node_;
    Tape::instance().push(on, [an, bn, on, m, k, n] {
      const double* g = on->grad.data();
      if (an->requires_grad)
        kern::matmul_nt_acc(m, n, k, g, bn->data->data(), ensure_grad(an));
      if (bn->requires_grad)
        kern::matmul_tn_acc(m, k, n, an->data->data(), g, ensure_grad(bn));
    });
  }
  return out;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  require_defined(x, "linear");
  require_defined(w, "linear");
  if (w.ndim() != 2)
    throw ShapeError("linear: weight must be rank 2, got " +
                     shape_str(w.shape()));
  int in = w.dim(0), out_dim = w.dim(1);
  if (x.dim(-1) != in)
    throw ShapeError("linear: input " + shape_str(x.shape()) +
                     " does not end in weight rows " + shape_str(w.shape()));
  if (b.defined() && (b.ndim() != 1 || b.dim(0) != out_dim))
    throw ShapeError("linear: bias " + shape_str(b.shape()) +
                     " does not match weight cols " + shape_str(w.shape()));
  long long rows64 = x.numel() / in;
  int rows = static_cast<int>(rows64);
  std::vector<int> out_shape = x.shape();
  out_shape.back() = out_dim;
  Tensor out = Tensor::zeros(out_shape);
  kern::matmul_nn(rows, in, out_dim, x.data(), w.data(), out.data());
  if (b.defined()) kern::add_rowvec(rows, out_dim, out.data(), b.data());
  if (want_tape({&x, &w, &b})) {
    out.set_requires_grad(true);
    auto xn = x.node_, wn = w.node_, on = out.node_;
    auto bn = b.defined() ? b.node_ : nullptr;
    Tape::instance().push(on, [xn, wn, bn, on, rows, in, out_dim] {
      const double* g = on->grad.data();
      if (xn->requires_grad)
        kern::matmul_nt_acc(rows, out_dim, in, g, wn->data->data(),
                            ensure_grad(xn));
      if (wn->requires_grad)
        kern::matmul_tn_acc(rows, in, out_dim, xn->data->data(), g,
                            ensure_grad(wn));
      if (bn && bn->requires_grad)
        kern::col_sum_acc(rows, out_dim, g, ensure_grad(bn));
    });
  }
  return out;
}

Tensor softmax(const Tensor& x, int axis) {
  require_defined(x, "softmax");
  int a = normalize_axis(axis, x.ndim(), "softmax");
  const double* p = x.data();
  long long n = x.numel();
  for (long long i = 0; i < n; ++i)
    if (!std::isfinite(p[i]))
      throw NumericError("softmax: non-finite input at flat index " +
                         std::to_string(i));
  int outer = static_cast<int>(outer_extent(x.shape(), a));
  int ax = x.dim(a);
  int inner = static_cast<int>(inner_extent(x.shape(), a));
  Tensor out = Tensor::zeros(x.shape());
  kern::softmax_strided(outer, ax, inner, x.data(), out.data());
  if (want_tape({&x})) {
    out.set_requires_grad(true);
    auto xn = x.node_, on = out.node_;
    Tape::instance().push(on, [xn, on, outer, ax, inner] {
      kern::softmax_bwd_strided(outer, ax, inner, on->data->data(),
                                on->grad.data(), ensure_grad(xn));
    });
  }
  return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps) {
  require_defined(x, "layer_norm");
  require_defined(gamma, "layer_norm");
  require_defined(beta, "layer_norm");
  if (eps < 0.0) throw ConfigError("layer_norm: eps must be >= 0");
  int cols = x.dim(-1);
  if (gamma.ndim() != 1 || gamma.dim(0) != cols || beta.ndim() != 1 ||
      beta.dim(0) != cols)
    throw ShapeError("layer_norm: gamma " + shape_str(gamma.shape()) +
                     " / beta " + shape_str(beta.shape()) +
                     " must be [" + std::to_string(cols) + "] for input " +
                     shape_str(x.shape()));
  int rows = static_cast<int>(x.numel() / cols);
  Tensor out = Tensor::zeros(x.shape());
  auto xhat = std::make_shared<Buffer>(static_cast<std::size_t>(x.numel()));
  auto inv_std = std::make_shared<Buffer>(static_cast<std::size_t>(rows));
  kern::layernorm_fwd(rows, cols, x.data(), gamma.data(), beta.data(), eps,
                      out.data(), xhat->data(), inv_std->data());
  if (want_tape({&x, &gamma, &beta})) {
    out.set_requires_grad(true);
    auto xn = x.node_, gn = gamma.node_, bn = beta.node_, on = out.node_;
    Tape::instance().push(on, [xn, gn, bn, on, xhat, inv_std, rows, cols] {
      Buffer sink_x, sink_g, sink_b;
      kern::layernorm_bwd(rows, cols, on->grad.data(), gn->data->data(),
                          xhat->data(), inv_std->data(), grad_sink(xn, sink_x),
                          grad_sink(gn, sink_g), grad_sink(bn, sink_b));
    });
  }
  return out;
}

Tensor reshape(const Tensor& x, std::vector<int> shape) {
  require_defined(x, "reshape");
  Tensor::check_shape(shape);
  long long n = 1;
  for (int s : shape) n *= s;
  if (n != x.numel())
    throw ShapeError("reshape: cannot view " + shape_str(x.shape()) + " as " +
                     shape_str(shape));
  Tensor out;
  out.node_ = std::make_shared<TensorNode>();
  out.node_->shape = std::move(shape);
  out.node_->data = x.node_->data;  // shared storage
  if (want_tape({&x})) {
    out.set_requires_grad(true);
    auto xn = x.node_, on = out.node_;
    std::size_t count = static_cast<std::size_t>(n);
    Tape::instance().push(on, [xn, on, count] {
      kern::vacc(count, on->grad.data(), ensure_grad(xn));
    });
  }
  return out;
}

Tensor transpose_12(const Tensor& x) {
  require_defined(x, "transpose_12");
  if (x.ndim() != 3)
    throw ShapeError("transpose_12: expects rank 3, got " +
                     shape_str(x.shape()));
  int b = x.dim(0), a1 = x.dim(1), a2 = x.dim(2);
  Tensor out = Tensor::zeros({b, a2, a1});
  const double* src = x.data();
  double* dst = out.data();
  for (int bi = 0; bi < b; ++bi)
    for (int i = 0; i < a1; ++i)
      for (int j = 0; j < a2; ++j)
        dst[(static_cast<std::size_t>(bi) * a2 + j) * a1 + i] =
            src[(static_cast<std::size_t>(bi) * a1 + i) * a2 + j];
  if (want_tape({&x})) {
    out.set_requires_grad(true);
    auto xn = x.node_, on = out.node_;
    Tape::instance().push(on, [xn, on, b, a1, a2] {
      const double* g = on->grad.data();
      double* dx = ensure_grad(xn);
      for (int bi = 0; bi < b; ++bi)
        for (int i = 0; i < a1; ++i)
          for (int j = 0; j < a2; ++j)
            dx[(static_cast<std::size_t>(bi) * a1 + i) * a2 + j] +=
                g[(static_cast<std::size_t>(bi) * a2 + j) * a1 + i];
    });
  }
  return out;
}

Tensor mean_axis(const Tensor& x, int axis) {
  require_defined(x, "mean_axis");
  int a = normalize_axis(axis, x.ndim(), "mean_axis");
  if (x.ndim() < 2)
    throw ShapeError("mean_axis: rank must be at least 2, got " +
                     shape_str(x.shape()));
  long long outer = outer_extent(x.shape(), a);
  int ax = x.dim(a);
  long long inner = inner_extent(x.shape(), a);
  std::vector<int> out_shape;
  for (int i = 0; i < x.ndim(); ++i)
    if (i != a) out_shape.push_back(x.dim(i));
  Tensor out = Tensor::zeros(out_shape);
  const double* src = x.data();
  double* dst = out.data();
  double inv = 1.0 / ax;
  for (long long o = 0; o < outer; ++o)
    for (long long i = 0; i < inner; ++i) {
      double acc = 0.0;
      for (int k = 0; k < ax; ++k)
        acc += src[(o * ax + k) * inner + i];
      dst[o * inner + i] = acc * inv;
    }
  if (want_tape({&x})) {
    out.set_requires_grad(true);
    auto xn = x.node_, on = out.node_;
    Tape::instance().push(on, [xn, on, outer, ax, inner, inv] {
      const double* g = on->grad.data();
      double* dx = ensure_grad(xn);
      for (long long o = 0; o < outer; ++o)
        for (int k = 0; k < ax; ++k)
          for (long long i = 0; i < inner; ++i)
            dx[(o * ax + k) * inner + i] += g[o * inner + i] * inv;
    });
  }
  return out;
}

Tensor broadcast_axis(const Tensor& x, int axis, int n) {
  require_defined(x, "broadcast_axis");
  if (n <= 0) throw ShapeError("broadcast_axis: extent must be positive");
  int nd = x.ndim();
  int a = axis < 0 ? axis + nd + 1 : axis;
  if (a < 0 || a > nd)
    throw ShapeError("broadcast_axis: axis " + std::to_string(axis) +
                     " out of range for rank " + std::to_string(nd));
  std::vector<int> out_shape = x.shape();
  out_shape.insert(out_shape.begin() + a, n);
  long long outer = outer_extent(out_shape, a);
  long long inner = inner_extent(out_shape, a);
  Tensor out = Tensor::zeros(out_shape);
  const double* src = x.data();
  double* dst = out.data();
  for (long long o = 0; o < outer; ++o)
    for (int k = 0; k < n; ++k)
      kern::copy(static_cast<std::size_t>(inner), src + o * inner,
                 dst + (o * n + k) * inner);
  if (want_tape({&x})) {
    out.set_requires_grad(true);
    auto xn = x.node_, on = out.node_;
    Tape::instance().push(on, [xn, on, outer, n, inner] {
      const double* g = on->grad.data();
      double* dx = ensure_grad(xn);
      for (long long o = 0; o < outer; ++o)
        for (int k = 0; k < n; ++k)
          kern::vacc(static_cast<std::size_t>(inner), g + (o * n + k) * inner,
                     dx + o * inner);
    });
  }
  return out;
}

Tensor concat_last(const Tensor& a, const Tensor& b) {
  require_defined(a, "concat_last");
  require_defined(b, "concat_last");
  if (a.ndim() != b.ndim())
    throw ShapeError("concat_last: rank mismatch: " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
  for (int i = 0; i + 1 < a.ndim(); ++i)
    if (a.dim(i) != b.dim(i))
      throw ShapeError("concat_last: leading dims disagree: " +
                       shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  int da = a.dim(-1), db = b.dim(-1);
  long long rows = a.numel() / da;
  std::vector<int> out_shape = a.shape();
  out_shape.back() = da + db;
  Tensor out = Tensor::zeros(out_shape);
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (long long r = 0; r < rows; ++r) {
    kern::copy(static_cast<std::size_t>(da), pa + r * da,
               po + r * (da + db));
    kern::copy(static_cast<std::size_t>(db), pb + r * db,
               po + r * (da + db) + da);
  }
  if (want_tape({&a, &b})) {
    out.set_requires_grad(true);
    auto an = a.node_, bn = b.node_, on = out.node_;
    Tape::instance().push(on, [an, bn, on, rows, da, db] {
      const double* g = on->grad.data();
      if (an->requires_grad) {
        double* dx = ensure_grad(an);
        for (long long r = 0; r < rows; ++r)
          kern::vacc(static_cast<std::size_t>(da), g + r * (da + db),
                     dx + r * da);
      }
      if (bn->requires_grad) {
        double* dx = ensure_grad(bn);
        for (long long r = 0; r < rows; ++r)
          kern::vacc(static_cast<std::size_t>(db), g + r * (da + db) + da,
                     dx + r * db);
      }
    });
  }
  return out;
}

Tensor sum_all(const Tensor& x) {
  require_defined(x, "sum_all");
  long long n = x.numel();
  const double* p = x.data();
  double acc = 0.0;
  for (long long i = 0; i < n; ++i) acc += p[i];
  Tensor out = Tensor::from_data({1}, {acc});
  if (want_tape({&x})) {
    out.set_requires_grad(true);
    auto xn = x.node_, on = out.node_;
    Tape::instance().push(on, [xn, on, n] {
      double g = on->grad.data()[0];
      double* dx = ensure_grad(xn);
      for (long long i = 0; i < n; ++i) dx[i] += g;
    });
  }
  return out;
}

Tensor mean_all(const Tensor& x) {
  require_defined(x, "mean_all");
  long long n = x.numel();
  const double* p = x.data();
  double acc = 0.0;
  for (long long i = 0; i < n; ++i) acc += p[i];
  Tensor out = Tensor::from_data({1}, {acc / static_cast<double>(n)});
  if (want_tape({&x})) {
    out.set_requires_grad(true);
    auto xn = x.node_, on = out.node_;
    Tape::instance().push(on, [xn, on, n] {
      double g = on->grad.data()[0] / static_cast<double>(n);
      double* dx = ensure_grad(xn);
      for (long long i = 0; i < n; ++i) dx[i] += g;
    });
  }
  return out;
}

Tensor mse_loss(const Tensor& pred, const Tensor& target) {
  require_defined(pred, "mse_loss");
  require_defined(target, "mse_loss");
  require_same_shape(pred, target, "mse_loss");
  long long n = pred.numel();
  const double* p = pred.data();
  const double* t = target.data();
  double acc = 0.0;
  for (long long i = 0; i < n; ++i) {
    double d = p[i] - t[i];
    acc += d * d;
  }
  Tensor out = Tensor::from_data({1}, {acc / static_cast<double>(n)});
  if (want_tape({&pred})) {
    out.set_requires_grad(true);
    auto pn = pred.node_, tn = target.node_, on = out.node_;
    Tape::instance().push(on, [pn, tn, on, n] {
      double g = 2.0 * on->grad.data()[0] / static_cast<double>(n);
      double* dx = ensure_grad(pn);
      const double* pp = pn->data->data();
      const double* tt = tn->data->data();
      for (long long i = 0; i < n; ++i) dx[i] += g * (pp[i] - tt[i]);
    });
  }
  return out;
}

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, int heads,
                 ForwardContext* ctx, TraceStage stage) {
  require_defined(q, "attention");
  require_defined(k, "attention");
  require_defined(v, "attention");
  if (q.ndim() != 3 || k.ndim() != 3 || v.ndim() != 3)
    throw ShapeError("attention: expects rank-3 q/k/v, got " +
                     shape_str(q.shape()) + ", " + shape_str(k.shape()) +
                     ", " + shape_str(v.shape()));
  int b = q.dim(0), nq = q.dim(1), d = q.dim(2);
  int nk = k.dim(1);
  if (k.dim(0) != b || v.dim(0) != b || k.dim(2) != d || v.dim(2) != d ||
      v.dim(1) != nk)
    throw ShapeError("attention: incompatible shapes: q " +
                     shape_str(q.shape()) + ", k " + shape_str(k.shape()) +
                     ", v " + shape_str(v.shape()));
  if (heads < 1 || d % heads != 0)
    throw ConfigError("attention: heads=" + std::to_string(heads) +
                      " must divide token width " + std::to_string(d));
  double sc = 1.0 / std::sqrt(static_cast<double>(d / heads));
  Tensor out = Tensor::zeros({b, nq, d});
  auto probs = std::make_shared<Buffer>(static_cast<std::size_t>(b) * heads *
                                        nq * nk);
  kern::attn_fwd(b, heads, nq, nk, d, q.data(), k.data(), v.data(), sc,
                 probs->data(), out.data());
  if (ctx) {
    ctx->score_elements += static_cast<unsigned long long>(b) * heads * nq * nk;
    record_rows(ctx, stage, probs->data(), b, heads, nq, nk);
  }
  if (want_tape({&q, &k, &v})) {
    out.set_requires_grad(true);
    auto qn = q.node_, kn = k.node_, vn = v.node_, on = out.node_;
    Tape::instance().push(on, [qn, kn, vn, on, probs, b, heads, nq, nk, d,
                               sc] {
      Buffer dlogits(static_cast<std::size_t>(b) * heads * nq * nk, 0.0);
      Buffer sink_q, sink_k, sink_v;
      kern::attn_bwd(b, heads, nq, nk, d, qn->data->data(), kn->data->data(),
                     vn->data->data(), probs->data(), on->grad.data(), sc,
                     dlogits.data(), grad_sink(qn, sink_q),
                     grad_sink(kn, sink_k), grad_sink(vn, sink_v));
    });
  }
  return out;
}

Tensor funnel_in_attention(const Tensor& k, const Tensor& v, const Tensor& q,
                           ForwardContext* ctx) {
  require_defined(k, "funnel_in_attention");
  require_defined(v, "funnel_in_attention");
  require_defined(q, "funnel_in_attention");
  if (k.ndim() != 4 || v.ndim() != 4)
    throw ShapeError("funnel_in_attention: patch tokens must be rank 4, got " +
                     shape_str(k.shape()) + " and " + shape_str(v.shape()));
  require_same_shape(k, v, "funnel_in_attention");
  int b = k.dim(0), c = k.dim(1), pn = k.dim(2), d = k.dim(3);
  if (q.ndim() != 2 || q.dim(0) != pn || q.dim(1) != d)
    throw ShapeError("funnel_in_attention: delegate rows " +
                     shape_str(q.shape()) + " must be [" + std::to_string(pn) +
                     ", " + std::to_string(d) + "]");
  double sc = 1.0 / std::sqrt(static_cast<double>(d));
  Tensor out = Tensor::zeros({b, pn, d});
  auto probs =
      std::make_shared<Buffer>(static_cast<std::size_t>(b) * pn * c);
  kern::funnel_in_fwd(b, c, pn, d, k.data(), v.data(), q.data(), sc,
                      probs->data(), out.data());
  if (ctx) {
    ctx->score_elements += static_cast<unsigned long long>(b) * pn * c;
    record_rows(ctx, TraceStage::funnel_in, probs->data(), b, 1, pn, c);
  }
  if (want_tape({&k, &v, &q})) {
    out.set_requires_grad(true);
    auto kn = k.node_, vn = v.node_, qn = q.node_, on = out.node_;
    Tape::instance().push(on, [kn, vn, qn, on, probs, b, c, pn, d, sc] {
      Buffer sink_k, sink_v, sink_q;
      kern::funnel_in_bwd(b, c, pn, d, kn->data->data(), vn->data->data(),
                          qn->data->data(), probs->data(), on->grad.data(), sc,
                          grad_sink(kn, sink_k), grad_sink(vn, sink_v),
                          grad_sink(qn, sink_q));
    });
  }
  return out;
}

Tensor funnel_out_gate(const Tensor& q, const Tensor& k, const Tensor& v,
                       ForwardContext* ctx) {
  require_defined(q, "funnel_out_gate");
  require_defined(k, "funnel_out_gate");
  require_defined(v, "funnel_out_gate");
  if (q.ndim() != 4)
    throw ShapeError("funnel_out_gate: patch queries must be rank 4, got " +
                     shape_str(q.shape()));
  int b = q.dim(0), c = q.dim(1), pn = q.dim(2), d = q.dim(3);
  require_same_shape(k, v, "funnel_out_gate");
  if (k.ndim() != 3 || k.dim(0) != b || k.dim(1) != pn || k.dim(2) != d)
    throw ShapeError("funnel_out_gate: delegate rows " + shape_str(k.shape()) +
                     " must be [" + std::to_string(b) + ", " +
                     std::to_string(pn) + ", " + std::to_string(d) + "]");
  double sc = 1.0 / std::sqrt(static_cast<double>(d));
  Tensor out = Tensor::zeros({b, c, pn, d});
  auto gates =
      std::make_shared<Buffer>(static_cast<std::size_t>(b) * pn * c);
  kern::funnel_out_gate_fwd(b, c, pn, d, q.data(), k.data(), v.data(), sc,
                            gates->data(), out.data());
  if (ctx) {
    ctx->score_elements += static_cast<unsigned long long>(b) * pn * c;
    record_rows(ctx, TraceStage::funnel_out, gates->data(), b, 1, pn, c);
  }
  if (want_tape({&q, &k, &v})) {
    out.set_requires_grad(true);
    auto qn = q.node_, kn = k.node_, vn = v.node_, on = out.node_;
    Tape::instance().push(on, [qn, kn, vn, on, gates, b, c, pn, d, sc] {
      Buffer sink_q, sink_k, sink_v;
      kern::funnel_out_gate_bwd(b, c, pn, d, qn->data->data(),
                                kn->data->data(), vn->data->data(),
                                gates->data(), on->grad.data(), sc,
                                grad_sink(qn, sink_q), grad_sink(kn, sink_k),
                                grad_sink(vn, sink_v));
    });
  }
  return out;
}

Tensor funnel_out_singleton(const Tensor& v, int c, ForwardContext* ctx) {
  require_defined(v, "funnel_out_singleton");
  if (v.ndim() != 3)
    throw ShapeError("funnel_out_singleton: delegate rows must be rank 3, got " +
                     shape_str(v.shape()));
  if (c <= 0) throw ConfigError("funnel_out_singleton: c must be positive");
  int b = v.dim(0), pn = v.dim(1);
  Tensor out = broadcast_axis(v, 1, c);
  if (ctx) {
    ctx->score_elements += static_cast<unsigned long long>(b) * c * pn;
    if (ctx->trace && ctx->trace->enabled) {
      for (int bi = 0; bi < b; ++bi)
        for (int cc = 0; cc < c; ++cc)
          for (int i = 0; i < pn; ++i) {
            TraceEntry e;
            e.layer = ctx->layer;
            e.stage = TraceStage::funnel_out;
            e.batch = bi;
            e.position = cc * pn + i;
            e.weights = {1.0};
            ctx->trace->entries.push_back(std::move(e));
          }
    }
  }
  return out;
}

}  // namespace delta
