#pragma once

#include <cstddef>

// Dense numeric kernels. Two implementations with identical semantics:
// kern::serial (reference) and kern::par (OpenMP). Loop nests are arranged
// so that for every output element the floating-point accumulation order is
// the same in both, making results bitwise equal regardless of thread count.
// The free functions at namespace scope dispatch on the active backend.
//
// Conventions: all buffers are caller-allocated, row-major. Plain kernels
// overwrite their output; *_acc kernels add into it (gradient accumulation).

namespace delta::kern {

enum class Backend { serial, parallel };

Backend backend();
void set_backend(Backend b);
bool parallel_available();
int max_threads();

#define DELTA_KERNEL_DECLS                                                     \
  void fill(std::size_t n, double* x, double v);                               \
  void copy(std::size_t n, const double* src, double* dst);                    \
  void vadd(std::size_t n, const double* a, const double* b, double* out);     \
  void vsub(std::size_t n, const double* a, const double* b, double* out);     \
  void vmul(std::size_t n, const double* a, const double* b, double* out);     \
  void vscale(std::size_t n, const double* a, double s, double* out);          \
  void vacc(std::size_t n, const double* src, double* dst);                    \
  void vacc_scaled(std::size_t n, const double* src, double s, double* dst);   \
  void gelu_fwd(std::size_t n, const double* x, double* y);                    \
  void gelu_bwd_acc(std::size_t n, const double* x, const double* dy,          \
                    double* dx);                                               \
  /* out = a·b; a: m×k, b: k×n */                                              \
  void matmul_nn(int m, int k, int n, const double* a, const double* b,        \
                 double* out);                                                 \
  /* out += a·bᵀ; a: m×k, b: n×k */                                            \
  void matmul_nt_acc(int m, int k, int n, const double* a, const double* b,    \
                     double* out);                                             \
  /* out += aᵀ·b; a: t×m, b: t×n */                                            \
  void matmul_tn_acc(int t, int m, int n, const double* a, const double* b,    \
                     double* out);                                             \
  void add_rowvec(int rows, int cols, double* x, const double* v);             \
  void col_sum_acc(int rows, int cols, const double* x, double* out);          \
  /* lanes along the middle extent; index = (o*axis + a)*inner + i */          \
  void softmax_strided(int outer, int axis, int inner, const double* x,        \
                       double* y);                                             \
  void softmax_bwd_strided(int outer, int axis, int inner, const double* y,    \
                           const double* dy, double* dx_acc);                  \
  void layernorm_fwd(int rows, int cols, const double* x,                      \
                     const double* gamma, const double* beta, double eps,      \
                     double* y, double* xhat, double* inv_std);                \
  void layernorm_bwd(int rows, int cols, const double* dy,                     \
                     const double* gamma, const double* xhat,                  \
                     const double* inv_std, double* dx_acc,                    \
                     double* dgamma_acc, double* dbeta_acc);                   \
  /* scaled dot-product attention over tokens.                                 \
     q: [b,nq,d], k/v: [b,nk,d], d = heads*dh, head h owns columns             \
     [h*dh,(h+1)*dh); probs: [b,heads,nq,nk]; out: [b,nq,d]. */                \
  void attn_fwd(int b, int heads, int nq, int nk, int d, const double* q,      \
                const double* k, const double* v, double scale,                \
                double* probs, double* out);                                   \
  /* dlogits_scratch: [b,heads,nq,nk], written then consumed here. */          \
  void attn_bwd(int b, int heads, int nq, int nk, int d, const double* q,      \
                const double* k, const double* v, const double* probs,         \
                const double* dout, double scale, double* dlogits_scratch,     \
                double* dq_acc, double* dk_acc, double* dv_acc);               \
  /* per-position funnel-in: at each (batch, position) the keys/values are     \
     the variable rows and the query is that position's delegate row.          \
     k/v: [b,c,pn,d], q: [pn,d], probs: [b,pn,c], out: [b,pn,d]. */            \
  void funnel_in_fwd(int b, int c, int pn, int d, const double* k,             \
                     const double* v, const double* q, double scale,           \
                     double* probs, double* out);                              \
  void funnel_in_bwd(int b, int c, int pn, int d, const double* k,             \
                     const double* v, const double* q, const double* probs,    \
                     const double* dout, double scale, double* dk_acc,         \
                     double* dv_acc, double* dq_acc);                          \
  /* per-position scalar gates: softmax over variables of <q row, key>,        \
     each variable row receives gate·value.                                    \
     q: [b,c,pn,d], k/v: [b,pn,d], gates: [b,pn,c], out: [b,c,pn,d]. */        \
  void funnel_out_gate_fwd(int b, int c, int pn, int d, const double* q,       \
                           const double* k, const double* v, double scale,     \
                           double* gates, double* out);                        \
  void funnel_out_gate_bwd(int b, int c, int pn, int d, const double* q,       \
                           const double* k, const double* v,                   \
                           const double* gates, const double* dout,            \
                           double scale, double* dq_acc, double* dk_acc,       \
                           double* dv_acc);

namespace serial {
DELTA_KERNEL_DECLS
}
namespace par {
DELTA_KERNEL_DECLS
}

// Backend-dispatched entry points used by the tensor layer.
DELTA_KERNEL_DECLS

#undef DELTA_KERNEL_DECLS

}  // namespace delta::kern
