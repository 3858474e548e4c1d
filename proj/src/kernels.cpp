#include "delta/kernels.hpp"

#include <atomic>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace delta::kern {

namespace {
std::atomic<Backend> g_backend{Backend::parallel};
}

Backend backend() { return g_backend.load(); }
void set_backend(Backend b) { g_backend.store(b); }

bool parallel_available() {
#ifdef _OPENMP
  return true;
#else
  return false;
#endif
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

#define DELTA_DISPATCH(call)               \
  if (backend() == Backend::parallel) {    \
    par::call;                             \
  } else {                                 \
    serial::call;                          \
  }

void fill(std::size_t n, double* x, double v) { DELTA_DISPATCH(fill(n, x, v)) }

void copy(std::size_t n, const double* src, double* dst) {
  DELTA_DISPATCH(copy(n, src, dst))
}

void vadd(std::size_t n, const double* a, const double* b, double* out) {
  DELTA_DISPATCH(vadd(n, a, b, out))
}

void vsub(std::size_t n, const double* a, const double* b, double* out) {
  DELTA_DISPATCH(vsub(n, a, b, out))
}

void vmul(std::size_t n, const double* a, const double* b, double* out) {
  DELTA_DISPATCH(vmul(n, a, b, out))
}

void vscale(std::size_t n, const double* a, double s, double* out) {
  DELTA_DISPATCH(vscale(n, a, s, out))
}

void vacc(std::size_t n, const double* src, double* dst) {
  DELTA_DISPATCH(vacc(n, src, dst))
}

void vacc_scaled(std::size_t n, const double* src, double s, double* dst) {
  DELTA_DISPATCH(vacc_scaled(n, src, s, dst))
}

void gelu_fwd(std::size_t n, const double* x, double* y) {
  DELTA_DISPATCH(gelu_fwd(n, x, y))
}

void gelu_bwd_acc(std::size_t n, const double* x, const double* dy,
                  double* dx) {
  DELTA_DISPATCH(gelu_bwd_acc(n, x, dy, dx))
}

void matmul_nn(int m, int k, int n, const double* a, const double* b,
               double* out) {
  DELTA_DISPATCH(matmul_nn(m, k, n, a, b, out))
}

void matmul_nt_acc(int m, int k, int n, const double* a, const double* b,
                   double* out) {
  DELTA_DISPATCH(matmul_nt_acc(m, k, n, a, b, out))
}

void matmul_tn_acc(int t, int m, int n, const double* a, const double* b,
                   double* out) {
  DELTA_DISPATCH(matmul_tn_acc(t, m, n, a, b, out))
}

void add_rowvec(int rows, int cols, double* x, const double* v) {
  DELTA_DISPATCH(add_rowvec(rows, cols, x, v))
}

void col_sum_acc(int rows, int cols, const double* x, double* out) {
  DELTA_DISPATCH(col_sum_acc(rows, cols, x, out))
}

void softmax_strided(int outer, int axis, int inner, const double* x,
                     double* y) {
  DELTA_DISPATCH(softmax_strided(outer, axis, inner, x, y))
}

void softmax_bwd_strided(int outer, int axis, int inner, const double* y,
                         const double* dy, double* dx_acc) {
  DELTA_DISPATCH(softmax_bwd_strided(outer, axis, inner, y, dy, dx_acc))
}

void layernorm_fwd(int rows, int cols, const double* x, const double* gamma,
                   const double* beta, double eps, double* y, double* xhat,
                   double* inv_std) {
  DELTA_DISPATCH(layernorm_fwd(rows, cols, x, gamma, beta, eps, y, xhat, inv_std))
}

void layernorm_bwd(int rows, int cols, const double* dy, const double* gamma,
                   const double* xhat, const double* inv_std, double* dx_acc,
                   double* dgamma_acc, double* dbeta_acc) {
  DELTA_DISPATCH(layernorm_bwd(rows, cols, dy, gamma, xhat, inv_std, dx_acc,
                               dgamma_acc, dbeta_acc))
}

void attn_fwd(int b, int heads, int nq, int nk, int d, const double* q,
              const double* k, const double* v, double scale, double* probs,
              double* out) {
  DELTA_DISPATCH(attn_fwd(b, heads, nq, nk, d, q, k, v, scale, probs, out))
}

void attn_bwd(int b, int heads, int nq, int nk, int d, const double* q,
              const double* k, const double* v, const double* probs,
              const double* dout, double scale, double* dlogits_scratch,
              double* dq_acc, double* dk_acc, double* dv_acc) {
  DELTA_DISPATCH(attn_bwd(b, heads, nq, nk, d, q, k, v, probs, dout, scale,
                          dlogits_scratch, dq_acc, dk_acc, dv_acc))
}

void funnel_in_fwd(int b, int c, int pn, int d, const double* k,
                   const double* v, const double* q, double scale,
                   double* probs, double* out) {
  DELTA_DISPATCH(funnel_in_fwd(b, c, pn, d, k, v, q, scale, probs, out))
}

void funnel_in_bwd(int b, int c, int pn, int d, const double* k,
                   const double* v, const double* q, const double* probs,
                   const double* dout, double scale, double* dk_acc,
                   double* dv_acc, double* dq_acc) {
  DELTA_DISPATCH(funnel_in_bwd(b, c, pn, d, k, v, q, probs, dout, scale,
                               dk_acc, dv_acc, dq_acc))
}

void funnel_out_gate_fwd(int b, int c, int pn, int d, const double* q,
                         const double* k, const double* v, double scale,
                         double* gates, double* out) {
  DELTA_DISPATCH(funnel_out_gate_fwd(b, c, pn, d, q, k, v, scale, gates, out))
}

void funnel_out_gate_bwd(int b, int c, int pn, int d, const double* q,
                         const double* k, const double* v,
                         const double* gates, const double* dout, double scale,
                         double* dq_acc, double* dk_acc, double* dv_acc) {
  DELTA_DISPATCH(funnel_out_gate_bwd(b, c, pn, d, q, k, v, gates, dout, scale,
                                     dq_acc, dk_acc, dv_acc))
}

#undef DELTA_DISPATCH

}  // namespace delta::kern
