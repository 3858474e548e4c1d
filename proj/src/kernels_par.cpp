#include "delta/kernels.hpp"

#include <cmath>
#include <limits>
#include <vector>

// OpenMP implementations. Threads are assigned whole output elements (or
// whole reduction lanes), and within each output element the accumulation
// order matches the serial reference exactly, so results are bitwise equal
// to kern::serial for any thread count.

namespace delta::kern::par {

namespace {
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
using ll = long long;
}  // namespace

void fill(std::size_t n, double* x, double v) {
#pragma omp parallel for schedule(static)
  for (ll i = 0; i < static_cast<ll>(n); ++i) x[i] = v;
}

void copy(std::size_t n, const double* src, double* dst) {
#pragma omp parallel for schedule(static)
  for (ll i = 0; i < static_cast<ll>(n); ++i) dst[i] = src[i];
}

void vadd(std::size_t n, const double* a, const double* b, double* out) {
#pragma omp parallel for schedule(static)
  for (ll i = 0; i < static_cast<ll>(n); ++i) out[i] = a[i] + b[i];
}

void vsub(std::size_t n, const double* a, const double* b, double* out) {
#pragma omp parallel for schedule(static)
  for (ll i = 0; i < static_cast<ll>(n); ++i) out[i] = a[i] - b[i];
}

void vmul(std::size_t n, const double* a, const double* b, double* out) {
#pragma omp parallel for schedule(static)
  for (ll i = 0; i < static_cast<ll>(n); ++i) out[i] = a[i] * b[i];
}

void vscale(std::size_t n, const double* a, double s, double* out) {
#pragma omp parallel for schedule(static)
  for (ll i = 0; i < static_cast<ll>(n); ++i) out[i] = a[i] * s;
}

void vacc(std::size_t n, const double* src, double* dst) {
#pragma omp parallel for schedule(static)
  for (ll i = 0; i < static_cast<ll>(n); ++i) dst[i] += src[i];
}

void vacc_scaled(std::size_t n, const double* src, double s, double* dst) {
#pragma omp parallel for schedule(static)
  for (ll i = 0; i < static_cast<ll>(n); ++i) dst[i] += src[i] * s;
}

void gelu_fwd(std::size_t n, const double* x, double* y) {
#pragma omp parallel for schedule(static)
  for (ll i = 0; i < static_cast<ll>(n); ++i)
    y[i] = 0.5 * x[i] * (1.0 + std::erf(x[i] * kInvSqrt2));
}

void gelu_bwd_acc(std::size_t n, const double* x, const double* dy,
                  double* dx) {
#pragma omp parallel for schedule(static)
  for (ll i = 0; i < static_cast<ll>(n); ++i) {
    double cdf = 0.5 * (1.0 + std::erf(x[i] * kInvSqrt2));
    double pdf = kInvSqrt2Pi * std::exp(-0.5 * x[i] * x[i]);
    dx[i] += dy[i] * (cdf + x[i] * pdf);
  }
}

void matmul_nn(int m, int k, int n, const double* a, const double* b,
               double* out) {
#pragma omp parallel for schedule(static)
  for (ll i = 0; i < m; ++i) {
    double* orow = out + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) orow[j] = 0.0;
    const double* arow = a + static_cast<std::size_t>(i) * k;
    for (int t = 0; t < k; ++t) {
      double ai = arow[t];
      const double* brow = b + static_cast<std::size_t>(t) * n;
      for (int j = 0; j < n; ++j) orow[j] += ai * brow[j];
    }
  }
}

void matmul_nt_acc(int m, int k, int n, const double* a, const double* b,
                   double* out) {
#pragma omp parallel for schedule(static)
  for (ll i = 0; i < m; ++i) {
    const double* arow = a + static_cast<std::size_t>(i) * k;
    double* orow = out + static_cast<std::size_t>(i) * n;
    for (int j = 0; j < n; ++j) {
      const double* brow = b + static_cast<std::size_t>(j) * k;
      double acc = 0.0;
      for (int t = 0; t < k; ++t) acc += arow[t] * brow[t];
      orow[j] += acc;
    }
  }
}

void matmul_tn_acc(int t, int m, int n, const double* a, const double* b,
                   double* out) {
#pragma omp parallel for schedule(static)
  for (ll i = 0; i < m; ++i) {
    double* orow = out + static_cast<std::size_t>(i) * n;
    for (int r = 0; r < t; ++r) {
      double ai = a[static_cast<std::size_t>(r) * m + i];
      const double* brow = b + static_cast<std::size_t>(r) * n;
      for (int j = 0; j < n; ++j) orow[j] += ai * brow[j];
    }
  }
}

void add_rowvec(int rows, int cols, double* x, const double* v) {
#pragma omp parallel for schedule(static)
  for (ll r = 0; r < rows; ++r) {
    double* row = x + static_cast<std::size_t>(r) * cols;
    for (int c = 0; c < cols; ++c) row[c] += v[c];
  }
}

void col_sum_acc(int rows, int cols, const double* x, double* out) {
#pragma omp parallel for schedule(static)
  for (ll c = 0; c < cols; ++c) {
    double acc = 0.0;
    for (int r = 0; r < rows; ++r)
      acc += x[static_cast<std::size_t>(r) * cols + c];
    out[c] += acc;
  }
}

void softmax_strided(int outer, int axis, int inner, const double* x,
                     double* y) {
  ll lanes = static_cast<ll>(outer) * inner;
#pragma omp parallel for schedule(static)
  for (ll lane = 0; lane < lanes; ++lane) {
    ll o = lane / inner;
    ll i = lane % inner;
    std::size_t base = static_cast<std::size_t>(o) * axis * inner + i;
    std::size_t step = static_cast<std::size_t>(inner);
    double m = -std::numeric_limits<double>::infinity();
    for (int a = 0; a < axis; ++a) {
      double v = x[base + a * step];
      if (v > m) m = v;
    }
    double z = 0.0;
    for (int a = 0; a < axis; ++a) {
      double e = std::exp(x[base + a * step] - m);
      y[base + a * step] = e;
      z += e;
    }
    double invz = 1.0 / z;
    for (int a = 0; a < axis; ++a) y[base + a * step] *= invz;
  }
}

void softmax_bwd_strided(int outer, int axis, int inner, const double* y,
                         const double* dy, double* dx_acc) {
  ll lanes = static_cast<ll>(outer) * inner;
#pragma omp parallel for schedule(static)
  for (ll lane = 0; lane < lanes; ++lane) {
    ll o = lane / inner;
    ll i = lane % inner;
    std::size_t base = static_cast<std::size_t>(o) * axis * inner + i;
    std::size_t step = static_cast<std::size_t>(inner);
    double dot = 0.0;
    for (int a = 0; a < axis; ++a)
      dot += y[base + a * step] * dy[base + a * step];
    for (int a = 0; a < axis; ++a)
      dx_acc[base + a * step] +=
          y[base + a * step] * (dy[base + a * step] - dot);
  }
}

void layernorm_fwd(int rows, int cols, const double* x, const double* gamma,
                   const double* beta, double eps, double* y, double* xhat,
                   double* inv_std) {
#pragma omp parallel for schedule(static)
  for (ll r = 0; r < rows; ++r) {
    std::size_t base = static_cast<std::size_t>(r) * cols;
    double mean = 0.0;
    for (int c = 0; c < cols; ++c) mean += x[base + c];
    mean /= cols;
    double var = 0.0;
    for (int c = 0; c < cols; ++c) {
      double d = x[base + c] - mean;
      var += d * d;
    }
    var /= cols;
    double is = 1.0 / std::sqrt(var + eps);
    inv_std[r] = is;
    for (int c = 0; c < cols; ++c) {
      double h = (x[base + c] - mean) * is;
      xhat[base + c] = h;
      y[base + c] = gamma[c] * h + beta[c];
    }
  }
}

void layernorm_bwd(int rows, int cols, const double* dy, const double* gamma,
                   const double* xhat, const double* inv_std, double* dx_acc,
                   double* dgamma_acc, double* dbeta_acc) {
#pragma omp parallel for schedule(static)
  for (ll r = 0; r < rows; ++r) {
    std::size_t base = static_cast<std::size_t>(r) * cols;
    double m1 = 0.0, m2 = 0.0;
    for (int c = 0; c < cols; ++c) {
      double g = dy[base + c] * gamma[c];
      m1 += g;
      m2 += g * xhat[base + c];
    }
    m1 /= cols;
    m2 /= cols;
    for (int c = 0; c < cols; ++c) {
      double g = dy[base + c] * gamma[c];
      dx_acc[base + c] += inv_std[r] * (g - m1 - xhat[base + c] * m2);
    }
  }
#pragma omp parallel for schedule(static)
  for (ll c = 0; c < cols; ++c) {
    double dg = 0.0, db = 0.0;
    for (int r = 0; r < rows; ++r) {
      std::size_t idx = static_cast<std::size_t>(r) * cols + c;
      dg += dy[idx] * xhat[idx];
      db += dy[idx];
    }
    dgamma_acc[c] += dg;
    dbeta_acc[c] += db;
  }
}

void attn_fwd(int b, int heads, int nq, int nk, int d, const double* q,
              const double* k, const double* v, double scale, double* probs,
              double* out) {
  int dh = d / heads;
  ll lanes = static_cast<ll>(b) * heads * nq;
#pragma omp parallel for schedule(static)
  for (ll lane = 0; lane < lanes; ++lane) {
    ll qi = lane % nq;
    ll h = (lane / nq) % heads;
    ll bi = lane / (static_cast<ll>(nq) * heads);
    const double* qrow =
        q + (static_cast<std::size_t>(bi) * nq + qi) * d + h * dh;
    double* prow =
        probs + ((static_cast<std::size_t>(bi) * heads + h) * nq + qi) * nk;
    double m = -std::numeric_limits<double>::infinity();
    for (int j = 0; j < nk; ++j) {
      const double* krow =
          k + (static_cast<std::size_t>(bi) * nk + j) * d + h * dh;
      double s = 0.0;
      for (int t = 0; t < dh; ++t) s += qrow[t] * krow[t];
      s *= scale;
      prow[j] = s;
      if (s > m) m = s;
    }
    double z = 0.0;
    for (int j = 0; j < nk; ++j) {
      double e = std::exp(prow[j] - m);
      prow[j] = e;
      z += e;
    }
    double invz = 1.0 / z;
    for (int j = 0; j < nk; ++j) prow[j] *= invz;
    double* orow = out + (static_cast<std::size_t>(bi) * nq + qi) * d + h * dh;
    for (int t = 0; t < dh; ++t) orow[t] = 0.0;
    for (int j = 0; j < nk; ++j) {
      double w = prow[j];
      const double* vrow =
          v + (static_cast<std::size_t>(bi) * nk + j) * d + h * dh;
      for (int t = 0; t < dh; ++t) orow[t] += w * vrow[t];
    }
  }
}

void attn_bwd(int b, int heads, int nq, int nk, int d, const double* q,
              const double* k, const double* v, const double* probs,
              const double* dout, double scale, double* dlogits_scratch,
              double* dq_acc, double* dk_acc, double* dv_acc) {
  int dh = d / heads;
  ll qlanes = static_cast<ll>(b) * heads * nq;
#pragma omp parallel for schedule(static)
  for (ll lane = 0; lane < qlanes; ++lane) {
    ll qi = lane % nq;
    ll h = (lane / nq) % heads;
    ll bi = lane / (static_cast<ll>(nq) * heads);
    std::size_t rbase =
        ((static_cast<std::size_t>(bi) * heads + h) * nq + qi) * nk;
    const double* prow = probs + rbase;
    double* dlrow = dlogits_scratch + rbase;
    const double* dorow =
        dout + (static_cast<std::size_t>(bi) * nq + qi) * d + h * dh;
    double dot = 0.0;
    for (int j = 0; j < nk; ++j) {
      const double* vrow =
          v + (static_cast<std::size_t>(bi) * nk + j) * d + h * dh;
      double dp = 0.0;
      for (int t = 0; t < dh; ++t) dp += dorow[t] * vrow[t];
      dlrow[j] = dp;
      dot += prow[j] * dp;
    }
    for (int j = 0; j < nk; ++j) dlrow[j] = prow[j] * (dlrow[j] - dot);
    double* dqrow =
        dq_acc + (static_cast<std::size_t>(bi) * nq + qi) * d + h * dh;
    for (int j = 0; j < nk; ++j) {
      const double* krow =
          k + (static_cast<std::size_t>(bi) * nk + j) * d + h * dh;
      double g = scale * dlrow[j];
      for (int t = 0; t < dh; ++t) dqrow[t] += g * krow[t];
    }
  }
  ll klanes = static_cast<ll>(b) * heads * nk;
#pragma omp parallel for schedule(static)
  for (ll lane = 0; lane < klanes; ++lane) {
    ll j = lane % nk;
    ll h = (lane / nk) % heads;
    ll bi = lane / (static_cast<ll>(nk) * heads);
    double* dkrow =
        dk_acc + (static_cast<std::size_t>(bi) * nk + j) * d + h * dh;
    double* dvrow =
        dv_acc + (static_cast<std::size_t>(bi) * nk + j) * d + h * dh;
    for (int qi = 0; qi < nq; ++qi) {
      std::size_t rbase =
          ((static_cast<std::size_t>(bi) * heads + h) * nq + qi) * nk;
      double w = probs[rbase + j];
      double g = scale * dlogits_scratch[rbase + j];
      const double* dorow =
          dout + (static_cast<std::size_t>(bi) * nq + qi) * d + h * dh;
      const double* qrow =
          q + (static_cast<std::size_t>(bi) * nq + qi) * d + h * dh;
      for (int t = 0; t < dh; ++t) {
        dvrow[t] += w * dorow[t];
        dkrow[t] += g * qrow[t];
      }
    }
  }
}

void funnel_in_fwd(int b, int c, int pn, int d, const double* k,
                   const double* v, const double* q, double scale,
                   double* probs, double* out) {
  ll lanes = static_cast<ll>(b) * pn;
#pragma omp parallel for schedule(static)
  for (ll lane = 0; lane < lanes; ++lane) {
    ll i = lane % pn;
    ll bi = lane / pn;
    const double* qrow = q + static_cast<std::size_t>(i) * d;
    double* prow = probs + (static_cast<std::size_t>(bi) * pn + i) * c;
    double m = -std::numeric_limits<double>::infinity();
    for (int cc = 0; cc < c; ++cc) {
      const double* krow =
          k + ((static_cast<std::size_t>(bi) * c + cc) * pn + i) * d;
      double s = 0.0;
      for (int t = 0; t < d; ++t) s += qrow[t] * krow[t];
      s *= scale;
      prow[cc] = s;
      if (s > m) m = s;
    }
    double z = 0.0;
    for (int cc = 0; cc < c; ++cc) {
      double e = std::exp(prow[cc] - m);
      prow[cc] = e;
      z += e;
    }
    double invz = 1.0 / z;
    for (int cc = 0; cc < c; ++cc) prow[cc] *= invz;
    double* orow = out + (static_cast<std::size_t>(bi) * pn + i) * d;
    for (int t = 0; t < d; ++t) orow[t] = 0.0;
    for (int cc = 0; cc < c; ++cc) {
      double w = prow[cc];
      const double* vrow =
          v + ((static_cast<std::size_t>(bi) * c + cc) * pn + i) * d;
      for (int t = 0; t < d; ++t) orow[t] += w * vrow[t];
    }
  }
}

void funnel_in_bwd(int b, int c, int pn, int d, const double* k,
                   const double* v, const double* q, const double* probs,
                   const double* dout, double scale, double* dk_acc,
                   double* dv_acc, double* dq_acc) {
  // positions are independent; the shared query row q[i] is touched only by
  // its own position, batches ascending inside, matching the reference
#pragma omp parallel for schedule(static)
  for (ll i = 0; i < pn; ++i) {
    std::vector<double> dl(static_cast<std::size_t>(c));
    double* dqrow = dq_acc + static_cast<std::size_t>(i) * d;
    const double* qrow = q + static_cast<std::size_t>(i) * d;
    for (int bi = 0; bi < b; ++bi) {
      const double* prow = probs + (static_cast<std::size_t>(bi) * pn + i) * c;
      const double* dorow =
          dout + (static_cast<std::size_t>(bi) * pn + i) * d;
      double dot = 0.0;
      for (int cc = 0; cc < c; ++cc) {
        std::size_t vbase =
            ((static_cast<std::size_t>(bi) * c + cc) * pn + i) * d;
        double dp = 0.0;
        for (int t = 0; t < d; ++t) dp += dorow[t] * v[vbase + t];
        dl[cc] = dp;
        dot += prow[cc] * dp;
        double w = prow[cc];
        double* dvrow = dv_acc + vbase;
        for (int t = 0; t < d; ++t) dvrow[t] += w * dorow[t];
      }
      for (int cc = 0; cc < c; ++cc) dl[cc] = prow[cc] * (dl[cc] - dot);
      for (int cc = 0; cc < c; ++cc) {
        std::size_t kbase =
            ((static_cast<std::size_t>(bi) * c + cc) * pn + i) * d;
        double g = scale * dl[cc];
        for (int t = 0; t < d; ++t) dqrow[t] += g * k[kbase + t];
        double* dkrow = dk_acc + kbase;
        for (int t = 0; t < d; ++t) dkrow[t] += g * qrow[t];
      }
    }
  }
}

void funnel_out_gate_fwd(int b, int c, int pn, int d, const double* q,
                         const double* k, const double* v, double scale,
                         double* gates, double* out) {
  ll lanes = static_cast<ll>(b) * pn;
#pragma omp parallel for schedule(static)
  for (ll lane = 0; lane < lanes; ++lane) {
    ll i = lane % pn;
    ll bi = lane / pn;
    const double* krow = k + (static_cast<std::size_t>(bi) * pn + i) * d;
    double* grow = gates + (static_cast<std::size_t>(bi) * pn + i) * c;
    double m = -std::numeric_limits<double>::infinity();
    for (int cc = 0; cc < c; ++cc) {
      const double* qrow =
          q + ((static_cast<std::size_t>(bi) * c + cc) * pn + i) * d;
      double s = 0.0;
      for (int t = 0; t < d; ++t) s += qrow[t] * krow[t];
      s *= scale;
      grow[cc] = s;
      if (s > m) m = s;
    }
    double z = 0.0;
    for (int cc = 0; cc < c; ++cc) {
      double e = std::exp(grow[cc] - m);
      grow[cc] = e;
      z += e;
    }
    double invz = 1.0 / z;
    for (int cc = 0; cc < c; ++cc) grow[cc] *= invz;
    const double* vrow = v + (static_cast<std::size_t>(bi) * pn + i) * d;
    for (int cc = 0; cc < c; ++cc) {
      double w = grow[cc];
      double* orow =
          out + ((static_cast<std::size_t>(bi) * c + cc) * pn + i) * d;
      for (int t = 0; t < d; ++t) orow[t] = w * vrow[t];
    }
  }
}

void funnel_out_gate_bwd(int b, int c, int pn, int d, const double* q,
                         const double* k, const double* v,
                         const double* gates, const double* dout, double scale,
                         double* dq_acc, double* dk_acc, double* dv_acc) {
  ll lanes = static_cast<ll>(b) * pn;
#pragma omp parallel for schedule(static)
  for (ll lane = 0; lane < lanes; ++lane) {
    ll i = lane % pn;
    ll bi = lane / pn;
    std::vector<double> dl(static_cast<std::size_t>(c));
    const double* grow = gates + (static_cast<std::size_t>(bi) * pn + i) * c;
    const double* krow = k + (static_cast<std::size_t>(bi) * pn + i) * d;
    const double* vrow = v + (static_cast<std::size_t>(bi) * pn + i) * d;
    double* dkrow = dk_acc + (static_cast<std::size_t>(bi) * pn + i) * d;
    double* dvrow = dv_acc + (static_cast<std::size_t>(bi) * pn + i) * d;
    double dot = 0.0;
    for (int cc = 0; cc < c; ++cc) {
      const double* dorow =
          dout + ((static_cast<std::size_t>(bi) * c + cc) * pn + i) * d;
      double dw = 0.0;
      for (int t = 0; t < d; ++t) dw += dorow[t] * vrow[t];
      dl[cc] = dw;
      dot += grow[cc] * dw;
      double w = grow[cc];
      for (int t = 0; t < d; ++t) dvrow[t] += w * dorow[t];
    }
    for (int cc = 0; cc < c; ++cc) dl[cc] = grow[cc] * (dl[cc] - dot);
    for (int cc = 0; cc < c; ++cc) {
      std::size_t qbase =
          ((static_cast<std::size_t>(bi) * c + cc) * pn + i) * d;
      double g = scale * dl[cc];
      double* dqrow = dq_acc + qbase;
      for (int t = 0; t < d; ++t) dqrow[t] += g * krow[t];
      const double* qrow = q + qbase;
      for (int t = 0; t < d; ++t) dkrow[t] += g * qrow[t];
    }
  }
}

}  // namespace delta::kern::par
