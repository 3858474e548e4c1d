#include <doctest.h>

#include <cmath>
#include <cstring>
#include <numeric>
#include <vector>

#include "delta/model.hpp"
#include "delta/profiler.hpp"

using namespace delta;

namespace {

ModelConfig tiny_delta(int c = 3) {
  ModelConfig cfg;
  cfg.arch = ArchKind::delta;
  cfg.variables = c;
  cfg.lookback = 8;
  cfg.horizon = 4;
  cfg.patch_len = 4;
  cfg.d_patch = 4;
  cfg.layers = 1;
  cfg.seed = 7;
  return cfg;
}

}  // namespace

TEST_SUITE_BEGIN("model");

TEST_CASE("funnel-in over a single variable has weight exactly 1") {
  Rng rng(1);
  auto k = Tensor::uniform({1, 1, 2, 3}, rng, -1.0, 1.0);
  auto v = Tensor::uniform({1, 1, 2, 3}, rng, -1.0, 1.0);
  auto q = Tensor::uniform({2, 3}, rng, -1.0, 1.0);
  AttentionTrace trace;
  trace.enabled = true;
  ForwardContext ctx;
  ctx.trace = &trace;
  auto out = funnel_in_attention(k, v, q, &ctx);
  REQUIRE(out.shape() == std::vector<int>{1, 2, 3});
  for (long long i = 0; i < out.numel(); ++i)
    CHECK(out.data()[i] == doctest::Approx(v.data()[i]).epsilon(1e-12));
  for (const auto& e : trace.entries) {
    REQUIRE(e.weights.size() == 1);
    CHECK(e.weights[0] == doctest::Approx(1.0).epsilon(1e-15));
  }
  Tape::instance().clear();
}

TEST_CASE("funnel-in weights match the two-variable hand softmax") {
  // logits q.k/sqrt(d)=  {0, ln 3} -> weights {0.25, 0.75}
  auto k = Tensor::from_data({1, 2, 1, 1}, {0.0, std::log(3.0)});
  auto v = Tensor::from_data({1, 2, 1, 1}, {10.0, 20.0});
  auto q = Tensor::from_data({1, 1}, {1.0});
  auto out = funnel_in_attention(k, v, q, nullptr);
  CHECK(out.data()[0] == doctest::Approx(0.25 * 10 + 0.75 * 20).epsilon(1e-12));
  Tape::instance().clear();
}

TEST_CASE("delegate self-attention over one token is the identity") {
  Rng rng(2);
  auto x = Tensor::uniform({2, 1, 4}, rng, -1.0, 1.0);
  AttentionTrace trace;
  trace.enabled = true;
  ForwardContext ctx;
  ctx.trace = &trace;
  auto out = attention(x, x, x, 1, &ctx, TraceStage::delegate);
  for (long long i = 0; i < x.numel(); ++i)
    CHECK(out.data()[i] == doctest::Approx(x.data()[i]).epsilon(1e-12));
  for (const auto& e : trace.entries) {
    REQUIRE(e.weights.size() == 1);
    CHECK(e.weights[0] == doctest::Approx(1.0).epsilon(1e-15));
  }
  Tape::instance().clear();
}

TEST_CASE("singleton funnel-out repeats the delegate row for every variable") {
  Rng rng(3);
  auto v = Tensor::uniform({2, 3, 4}, rng, -1.0, 1.0);
  auto out = funnel_out_singleton(v, 5, nullptr);
  REQUIRE(out.shape() == std::vector<int>{2, 5, 3, 4});
  for (int b = 0; b < 2; ++b)
    for (int c = 0; c < 5; ++c)
      for (int i = 0; i < 12; ++i)
        CHECK(out.data()[(b * 5 + c) * 12 + i] == v.data()[b * 12 + i]);
  Tape::instance().clear();
}

TEST_CASE("forecast output shape and bitwise determinism") {
  auto cfg = tiny_delta();
  Model m1 = init_model(cfg);
  Model m2 = init_model(cfg);
  Rng rng(9);
  auto w = Tensor::uniform({2, cfg.variables, cfg.lookback}, rng, -2.0, 2.0);
  NoGradGuard ng;
  auto y1 = m1.forecast(w);
  auto y2 = m2.forecast(w);
  REQUIRE(y1.shape() == std::vector<int>{2, cfg.variables, cfg.horizon});
  CHECK(std::memcmp(y1.data(), y2.data(),
                    sizeof(double) * static_cast<std::size_t>(y1.numel())) == 0);
}

TEST_CASE("delta model is equivariant under variable permutation") {
  auto cfg = tiny_delta(5);
  Model model = init_model(cfg);
  Rng rng(21);
  auto w = Tensor::uniform({1, 5, 8}, rng, -1.0, 1.0);
  NoGradGuard ng;
  auto base = model.forecast(w);
  std::vector<int> perm{3, 0, 4, 1, 2};
  auto wp = Tensor::zeros({1, 5, 8});
  for (int c = 0; c < 5; ++c)
    std::memcpy(wp.data() + c * 8, w.data() + perm[c] * 8, 8 * sizeof(double));
  auto yp = model.forecast(wp);
  for (int c = 0; c < 5; ++c)
    for (int h = 0; h < 4; ++h)
      CHECK(yp.data()[c * 4 + h] ==
            doctest::Approx(base.data()[perm[c] * 4 + h]).epsilon(1e-12));
}

TEST_CASE("counted attention elements equal the closed forms") {
  struct Case {
    ArchKind arch;
    FunnelOutMode mode;
  };
  const Case cases[] = {
      {ArchKind::delta, FunnelOutMode::variable_gate},
      {ArchKind::delta, FunnelOutMode::all_delegates},
      {ArchKind::delta, FunnelOutMode::singleton},
      {ArchKind::variate_only, FunnelOutMode::variable_gate},
      {ArchKind::full, FunnelOutMode::variable_gate},
      {ArchKind::time_only, FunnelOutMode::variable_gate},
  };
  for (const auto& cs : cases) {
    ModelConfig cfg = tiny_delta(4);
    cfg.arch = cs.arch;
    cfg.funnel_out_mode = cs.mode;
    cfg.layers = 2;
    Model model = init_model(cfg);
    Rng rng(4);
    auto w = Tensor::uniform({1, 4, 8}, rng, -1.0, 1.0);
    ForwardContext ctx;
    NoGradGuard ng;
    model.forecast(w, &ctx);
    long long per_layer = analytic_attention_elements(
        cs.arch, 4, cfg.lookback, cfg.patch_len, cs.mode);
    CHECK(ctx.score_elements == static_cast<unsigned long long>(
                                    cfg.layers * per_layer));
  }
}

TEST_CASE("every traced softmax row is normalized") {
  for (ArchKind arch : {ArchKind::delta, ArchKind::variate_only, ArchKind::full,
                        ArchKind::time_only}) {
    ModelConfig cfg = tiny_delta(3);
    cfg.arch = arch;
    Model model = init_model(cfg);
    Rng rng(6);
    auto w = Tensor::uniform({2, 3, 8}, rng, -3.0, 3.0);
    AttentionTrace trace;
    trace.enabled = true;
    ForwardContext ctx;
    ctx.trace = &trace;
    NoGradGuard ng;
    model.forecast(w, &ctx);
    REQUIRE(!trace.entries.empty());
    for (const auto& e : trace.entries) {
      double s = 0.0;
      for (double p : e.weights) {
        CHECK(p >= 0.0);
        s += p;
      }
      CHECK(s == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("model gradients match finite differences on a tiny config") {
  auto cfg = tiny_delta();
  CHECK(gradcheck_model(cfg, 11, 1e-5) < 1e-4);
}

TEST_CASE("arch labels parse to the right funnel operators") {
  CHECK(parse_arch("delta").kind == ArchKind::delta);
  CHECK(parse_arch("delta").funnel_in_op == FunnelOp::attention);
  CHECK(parse_arch("delta_mlp_funnel").funnel_in_op == FunnelOp::mlp);
  CHECK(parse_arch("delta_mlp_funnel").funnel_out_op == FunnelOp::mlp);
  CHECK(parse_arch("delta_linear_funnel").funnel_in_op == FunnelOp::linear);
  CHECK(parse_arch("delta_mixed_funnel_in_attn").funnel_in_op ==
        FunnelOp::attention);
  CHECK(parse_arch("delta_mixed_funnel_in_attn").funnel_out_op ==
        FunnelOp::mlp);
  CHECK(parse_arch("delta_mixed_funnel_out_attn").funnel_in_op ==
        FunnelOp::mlp);
  CHECK(parse_arch("delta_mixed_funnel_out_attn").funnel_out_op ==
        FunnelOp::attention);
  CHECK(parse_arch("time_only").kind == ArchKind::time_only);
  CHECK_THROWS_AS(parse_arch("resnet"), ConfigError);
}

TEST_CASE("invalid configurations name the offending fields") {
  ModelConfig cfg = tiny_delta();
  cfg.lookback = 10;  // not divisible by patch_len 4
  auto bad = cfg.validate();
  REQUIRE(!bad.empty());
  CHECK_THROWS_AS(init_model(cfg), ConfigError);

  ModelConfig none = tiny_delta();
  none.variables = 0;
  CHECK_THROWS_AS(init_model(none), ConfigError);
}

TEST_SUITE_END();
