#include <chrono>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "delta/common.hpp"
#include "delta/kernels.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

// Times each kernel under the serial reference and the OpenMP backend and
// checks the outputs stay bitwise identical. Build target only, not a test.

namespace {

using namespace delta;

double now_seconds() {
#ifdef _OPENMP
  return omp_get_wtime();
#else
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
#endif
}

std::vector<double> random_vec(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (auto& x : v) x = rng.uniform(-1.0, 1.0);
  return v;
}

struct BenchResult {
  double serial_s = 0.0;
  double parallel_s = 0.0;
  bool bitwise = false;
};

template <typename Fn>
double best_of(int reps, Fn&& fn) {
  double best = 1e300;
  for (int r = 0; r < reps; ++r) {
    double t0 = now_seconds();
    fn();
    double dt = now_seconds() - t0;
    if (dt < best) best = dt;
  }
  return best;
}

void report(const char* name, const BenchResult& r) {
  std::printf("%-12s serial %8.3f ms   parallel %8.3f ms   speedup %5.2fx   bitwise-identical: %s\n",
              name, r.serial_s * 1e3, r.parallel_s * 1e3,
              r.serial_s / r.parallel_s, r.bitwise ? "yes" : "NO");
}

}  // namespace

int main() {
  Rng rng(12345);
  const int reps = 5;
#ifdef _OPENMP
  std::printf("threads available: %d\n", omp_get_max_threads());
#else
  std::printf("built without OpenMP; parallel backend falls back to serial\n");
#endif

  {
    int m = 256, k = 256, n = 256;
    auto a = random_vec(static_cast<std::size_t>(m) * k, rng);
    auto b = random_vec(static_cast<std::size_t>(k) * n, rng);
    std::vector<double> out_s(static_cast<std::size_t>(m) * n);
    std::vector<double> out_p(out_s.size());
    BenchResult r;
    r.serial_s = best_of(reps, [&] {
      kern::serial::matmul_nn(m, k, n, a.data(), b.data(), out_s.data());
    });
    r.parallel_s = best_of(reps, [&] {
      kern::par::matmul_nn(m, k, n, a.data(), b.data(), out_p.data());
    });
    r.bitwise = std::memcmp(out_s.data(), out_p.data(),
                            out_s.size() * sizeof(double)) == 0;
    report("matmul", r);
  }

  {
    int outer = 4096, axis = 512, inner = 1;
    auto x = random_vec(static_cast<std::size_t>(outer) * axis, rng);
    auto y_s = x;
    auto y_p = x;
    BenchResult r;
    r.serial_s = best_of(reps, [&] {
      kern::serial::softmax_strided(outer, axis, inner, x.data(), y_s.data());
    });
    r.parallel_s = best_of(reps, [&] {
      kern::par::softmax_strided(outer, axis, inner, x.data(), y_p.data());
    });
    r.bitwise = std::memcmp(y_s.data(), y_p.data(),
                            y_s.size() * sizeof(double)) == 0;
    report("softmax", r);
  }

  {
    int rows = 4096, cols = 512;
    auto x = random_vec(static_cast<std::size_t>(rows) * cols, rng);
    std::vector<double> gamma(cols, 1.0), beta(cols, 0.0);
    std::vector<double> y_s(x.size()), y_p(x.size());
    std::vector<double> xhat_s(x.size()), xhat_p(x.size());
    std::vector<double> inv_s(rows), inv_p(rows);
    BenchResult r;
    r.serial_s = best_of(reps, [&] {
      kern::serial::layernorm_fwd(rows, cols, x.data(), gamma.data(),
                                  beta.data(), 1e-5, y_s.data(),
                                  xhat_s.data(), inv_s.data());
    });
    r.parallel_s = best_of(reps, [&] {
      kern::par::layernorm_fwd(rows, cols, x.data(), gamma.data(),
                               beta.data(), 1e-5, y_p.data(), xhat_p.data(),
                               inv_p.data());
    });
    r.bitwise = std::memcmp(y_s.data(), y_p.data(),
                            y_s.size() * sizeof(double)) == 0;
    report("layernorm", r);
  }

  {
    int b = 8, heads = 4, nq = 256, nk = 256, d = 64;
    std::size_t qn = static_cast<std::size_t>(b) * nq * d;
    std::size_t kn = static_cast<std::size_t>(b) * nk * d;
    auto q = random_vec(qn, rng);
    auto k = random_vec(kn, rng);
    auto v = random_vec(kn, rng);
    std::size_t pn = static_cast<std::size_t>(b) * heads * nq * nk;
    std::vector<double> probs_s(pn), probs_p(pn), out_s(qn), out_p(qn);
    double scale = 0.25;
    BenchResult r;
    r.serial_s = best_of(reps, [&] {
      kern::serial::attn_fwd(b, heads, nq, nk, d, q.data(), k.data(),
                             v.data(), scale, probs_s.data(), out_s.data());
    });
    r.parallel_s = best_of(reps, [&] {
      kern::par::attn_fwd(b, heads, nq, nk, d, q.data(), k.data(), v.data(),
                          scale, probs_p.data(), out_p.data());
    });
    r.bitwise = std::memcmp(out_s.data(), out_p.data(),
                            out_s.size() * sizeof(double)) == 0 &&
                std::memcmp(probs_s.data(), probs_p.data(),
                            probs_s.size() * sizeof(double)) == 0;
    report("attention", r);
  }

  {
    int b = 4, c = 512, pn = 8, d = 64;
    std::size_t kvn = static_cast<std::size_t>(b) * c * pn * d;
    auto k = random_vec(kvn, rng);
    auto v = random_vec(kvn, rng);
    auto q = random_vec(static_cast<std::size_t>(pn) * d, rng);
    std::size_t probs_n = static_cast<std::size_t>(b) * pn * c;
    std::size_t on = static_cast<std::size_t>(b) * pn * d;
    std::vector<double> probs_s(probs_n), probs_p(probs_n), out_s(on),
        out_p(on);
    double scale = 0.125;
    BenchResult r;
    r.serial_s = best_of(reps, [&] {
      kern::serial::funnel_in_fwd(b, c, pn, d, k.data(), v.data(), q.data(),
                                  scale, probs_s.data(), out_s.data());
    });
    r.parallel_s = best_of(reps, [&] {
      kern::par::funnel_in_fwd(b, c, pn, d, k.data(), v.data(), q.data(),
                               scale, probs_p.data(), out_p.data());
    });
    r.bitwise = std::memcmp(out_s.data(), out_p.data(),
                            out_s.size() * sizeof(double)) == 0 &&
                std::memcmp(probs_s.data(), probs_p.data(),
                            probs_s.size() * sizeof(double)) == 0;
    report("funnel_in", r);
  }

  return 0;
}
