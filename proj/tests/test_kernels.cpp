#include <doctest.h>

#include <cstring>
#include <vector>

#include "delta/common.hpp"
#include "delta/kernels.hpp"

using namespace delta;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_SUITE_BEGIN("kernels");

TEST_CASE("serial and parallel matmul are bitwise equal") {
  const int m = 37, k = 53, n = 29;
  auto a = random_vec(static_cast<std::size_t>(m) * k, 1);
  auto b = random_vec(static_cast<std::size_t>(k) * n, 2);
  std::vector<double> ys(static_cast<std::size_t>(m) * n);
  std::vector<double> yp(ys.size());
  kern::serial::matmul_nn(m, k, n, a.data(), b.data(), ys.data());
  kern::par::matmul_nn(m, k, n, a.data(), b.data(), yp.data());
  CHECK(bitwise_equal(ys, yp));
}

TEST_CASE("serial and parallel accumulating matmuls are bitwise equal") {
  const int m = 17, k = 23, n = 19;
  auto a = random_vec(static_cast<std::size_t>(m) * k, 3);
  auto bt = random_vec(static_cast<std::size_t>(n) * k, 4);
  auto base = random_vec(static_cast<std::size_t>(m) * n, 5);
  auto ys = base, yp = base;
  kern::serial::matmul_nt_acc(m, k, n, a.data(), bt.data(), ys.data());
  kern::par::matmul_nt_acc(m, k, n, a.data(), bt.data(), yp.data());
  CHECK(bitwise_equal(ys, yp));

  const int t = 31;
  auto at = random_vec(static_cast<std::size_t>(t) * m, 6);
  auto b2 = random_vec(static_cast<std::size_t>(t) * n, 7);
  ys = base;
  yp = base;
  kern::serial::matmul_tn_acc(t, m, n, at.data(), b2.data(), ys.data());
  kern::par::matmul_tn_acc(t, m, n, at.data(), b2.data(), yp.data());
  CHECK(bitwise_equal(ys, yp));
}

TEST_CASE("serial and parallel softmax are bitwise equal and normalized") {
  const int outer = 11, axis = 61, inner = 7;
  auto x = random_vec(static_cast<std::size_t>(outer) * axis * inner, 8);
  std::vector<double> ys(x.size()), yp(x.size());
  kern::serial::softmax_strided(outer, axis, inner, x.data(), ys.data());
  kern::par::softmax_strided(outer, axis, inner, x.data(), yp.data());
  CHECK(bitwise_equal(ys, yp));
  for (int o = 0; o < outer; ++o)
    for (int i = 0; i < inner; ++i) {
      double s = 0.0;
      for (int a = 0; a < axis; ++a) {
        double w = ys[(static_cast<std::size_t>(o) * axis + a) * inner + i];
        CHECK(w >= 0.0);
        s += w;
      }
      CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("serial and parallel layernorm are bitwise equal") {
  const int rows = 43, cols = 32;
  auto x = random_vec(static_cast<std::size_t>(rows) * cols, 9);
  auto g = random_vec(cols, 10);
  auto b = random_vec(cols, 11);
  std::vector<double> ys(x.size()), yp(x.size());
  std::vector<double> xhs(x.size()), xhp(x.size());
  std::vector<double> is(rows), ip(rows);
  kern::serial::layernorm_fwd(rows, cols, x.data(), g.data(), b.data(), 1e-5,
                              ys.data(), xhs.data(), is.data());
  kern::par::layernorm_fwd(rows, cols, x.data(), g.data(), b.data(), 1e-5,
                           yp.data(), xhp.data(), ip.data());
  CHECK(bitwise_equal(ys, yp));
  CHECK(bitwise_equal(xhs, xhp));
  CHECK(bitwise_equal(is, ip));
}

TEST_CASE("serial and parallel attention are bitwise equal") {
  const int b = 3, heads = 2, nq = 13, nk = 17, d = 8;
  auto q = random_vec(static_cast<std::size_t>(b) * nq * d, 12);
  auto k = random_vec(static_cast<std::size_t>(b) * nk * d, 13);
  auto v = random_vec(static_cast<std::size_t>(b) * nk * d, 14);
  const double scale = 0.5;
  std::vector<double> ps(static_cast<std::size_t>(b) * heads * nq * nk);
  std::vector<double> pp(ps.size());
  std::vector<double> os(q.size()), op(q.size());
  kern::serial::attn_fwd(b, heads, nq, nk, d, q.data(), k.data(), v.data(),
                         scale, ps.data(), os.data());
  kern::par::attn_fwd(b, heads, nq, nk, d, q.data(), k.data(), v.data(), scale,
                      pp.data(), op.data());
  CHECK(bitwise_equal(ps, pp));
  CHECK(bitwise_equal(os, op));

  auto dout = random_vec(os.size(), 15);
  std::vector<double> scr_s(ps.size()), scr_p(ps.size());
  std::vector<double> dqs(q.size(), 0.1), dqp(q.size(), 0.1);
  std::vector<double> dks(k.size(), 0.2), dkp(k.size(), 0.2);
  std::vector<double> dvs(v.size(), 0.3), dvp(v.size(), 0.3);
  kern::serial::attn_bwd(b, heads, nq, nk, d, q.data(), k.data(), v.data(),
                         ps.data(), dout.data(), scale, scr_s.data(),
                         dqs.data(), dks.data(), dvs.data());
  kern::par::attn_bwd(b, heads, nq, nk, d, q.data(), k.data(), v.data(),
                      pp.data(), dout.data(), scale, scr_p.data(), dqp.data(),
                      dkp.data(), dvp.data());
  CHECK(bitwise_equal(dqs, dqp));
  CHECK(bitwise_equal(dks, dkp));
  CHECK(bitwise_equal(dvs, dvp));
}

TEST_CASE("serial and parallel funnel stages are bitwise equal") {
  const int b = 2, c = 19, pn = 5, d = 6;
  auto k = random_vec(static_cast<std::size_t>(b) * c * pn * d, 16);
  auto v = random_vec(k.size(), 17);
  auto q = random_vec(static_cast<std::size_t>(pn) * d, 18);
  const double scale = 0.37;
  std::vector<double> ps(static_cast<std::size_t>(b) * pn * c), pp(ps.size());
  std::vector<double> os(static_cast<std::size_t>(b) * pn * d), op(os.size());
  kern::serial::funnel_in_fwd(b, c, pn, d, k.data(), v.data(), q.data(), scale,
                              ps.data(), os.data());
  kern::par::funnel_in_fwd(b, c, pn, d, k.data(), v.data(), q.data(), scale,
                           pp.data(), op.data());
  CHECK(bitwise_equal(ps, pp));
  CHECK(bitwise_equal(os, op));

  auto gq = random_vec(k.size(), 19);
  auto gk = random_vec(os.size(), 20);
  auto gv = random_vec(os.size(), 21);
  std::vector<double> gs(ps.size()), gp(ps.size());
  std::vector<double> gos(k.size()), gop(k.size());
  kern::serial::funnel_out_gate_fwd(b, c, pn, d, gq.data(), gk.data(),
                                    gv.data(), scale, gs.data(), gos.data());
  kern::par::funnel_out_gate_fwd(b, c, pn, d, gq.data(), gk.data(), gv.data(),
                                 scale, gp.data(), gop.data());
  CHECK(bitwise_equal(gs, gp));
  CHECK(bitwise_equal(gos, gop));
}

TEST_CASE("backend dispatch routes to the active backend") {
  auto saved = kern::backend();
  std::vector<double> a{1.0, 2.0}, b{3.0, 4.0}, out(2);
  kern::set_backend(kern::Backend::serial);
  kern::vadd(2, a.data(), b.data(), out.data());
  CHECK(out[0] == 4.0);
  CHECK(out[1] == 6.0);
  kern::set_backend(kern::Backend::parallel);
  kern::vadd(2, a.data(), b.data(), out.data());
  CHECK(out[0] == 4.0);
  CHECK(out[1] == 6.0);
  kern::set_backend(saved);
}

TEST_SUITE_END();
