#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "delta/synth.hpp"
#include "delta/train.hpp"

using namespace delta;

namespace {

ModelConfig tiny_cfg() {
  ModelConfig cfg;
  cfg.arch = ArchKind::delta;
  cfg.variables = 3;
  cfg.lookback = 8;
  cfg.horizon = 4;
  cfg.patch_len = 4;
  cfg.d_patch = 4;
  cfg.layers = 1;
  cfg.seed = 3;
  return cfg;
}

TimeSeriesDataset tiny_dataset(int c = 3, int t = 220, std::uint64_t seed = 9) {
  KeyRetrievalSpec spec;
  spec.variables = c;
  spec.n_keys = 1;
  spec.length = t;
  spec.lookback = 8;
  spec.horizon = 4;
  spec.seed = seed;
  return gen_keyretrieval_dataset(spec);
}

}  // namespace

TEST_SUITE_BEGIN("train");

TEST_CASE("one adam step from a unit gradient moves by the closed form") {
  std::vector<Param> params;
  params.push_back({"w", Tensor::zeros({1}, true)});
  params[0].value.grad_data()[0] = 1.0;
  AdamOptimizer opt(params, 1e-3);
  opt.step();
  // mhat = vhat = 1 exactly after one step, so dw = -lr / (1 + eps)
  double expect = -1e-3 / (1.0 + 1e-8);
  CHECK(params[0].value.data()[0] == doctest::Approx(expect).epsilon(1e-12));
  CHECK(std::abs(params[0].value.data()[0] - expect) < 1e-15);
}

TEST_CASE("zero learning rate leaves parameters bitwise unchanged") {
  std::vector<Param> params;
  params.push_back({"w", Tensor::from_data({2}, {0.5, -0.25}, true)});
  params[0].value.grad_data()[0] = 3.0;
  params[0].value.grad_data()[1] = -2.0;
  AdamOptimizer opt(params, 0.0);
  opt.step();
  CHECK(params[0].value.data()[0] == 0.5);
  CHECK(params[0].value.data()[1] == -0.25);
}

TEST_CASE("non-finite gradients abort with the parameter's name") {
  std::vector<Param> params;
  params.push_back({"blows_up", Tensor::zeros({1}, true)});
  params[0].value.grad_data()[0] = std::nan("");
  AdamOptimizer opt(params, 1e-3);
  try {
    opt.step();
    FAIL("expected NumericError");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("blows_up") != std::string::npos);
  }
}

TEST_CASE("metrics match hand values") {
  auto pred = Tensor::from_data({1, 1, 2}, {0.0, 0.0});
  auto truth = Tensor::from_data({1, 1, 2}, {1.0, 3.0});
  auto m = compute_metrics(pred, truth);
  CHECK(m.mse == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(m.mae == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("a short training run reduces the training loss") {
  auto ds = tiny_dataset();
  auto splits = dataset_splits(ds, 8, 4);
  apply_global_zscore(ds, splits);
  Model model = init_model(tiny_cfg());
  TrainConfig tc;
  tc.lr = 3e-3;
  tc.epochs = 5;
  tc.batch_size = 16;
  tc.seed = 2;
  auto res = train(model, ds, splits, tc);
  REQUIRE(res.history.size() == 5);
  CHECK(res.history.back().train_mse < res.history.front().train_mse);
  CHECK(res.best_epoch >= 0);
}

TEST_CASE("training is bitwise reproducible for a fixed seed") {
  auto run = [] {
    auto ds = tiny_dataset();
    auto splits = dataset_splits(ds, 8, 4);
    apply_global_zscore(ds, splits);
    Model model = init_model(tiny_cfg());
    TrainConfig tc;
    tc.lr = 1e-3;
    tc.epochs = 2;
    tc.batch_size = 16;
    tc.seed = 4;
    train(model, ds, splits, tc);
    return model.param_checksum();
  };
  CHECK(run() == run());
}

TEST_CASE("evaluate reports model and naive baselines over the same windows") {
  auto ds = tiny_dataset();
  auto splits = dataset_splits(ds, 8, 4);
  apply_global_zscore(ds, splits);
  Model model = init_model(tiny_cfg());
  auto ev = evaluate(model, ds, splits);
  CHECK(ev.windows > 0);
  CHECK(std::isfinite(ev.model_metrics.mse));
  CHECK(std::isfinite(ev.repeat_last.mse));
  CHECK(std::isfinite(ev.train_mean.mse));
  CHECK(ev.repeat_last.mse > 0.0);
}

TEST_CASE("checkpoints round-trip parameters bitwise") {
  auto cfg = tiny_cfg();
  Model model = init_model(cfg);
  std::string path = "ckpt_roundtrip_test.bin";
  save_checkpoint(path, model, "deadbeef");
  Model back = load_checkpoint(path);
  std::remove(path.c_str());
  REQUIRE(back.params.size() == model.params.size());
  CHECK(back.param_checksum() == model.param_checksum());
  CHECK(back.cfg.variables == cfg.variables);
  CHECK(back.cfg.arch == cfg.arch);
  Rng rng(19);
  auto w = Tensor::uniform({1, 3, 8}, rng, -1.0, 1.0);
  NoGradGuard ng;
  auto y1 = model.forecast(w);
  auto y2 = back.forecast(w);
  CHECK(std::memcmp(y1.data(), y2.data(),
                    sizeof(double) * static_cast<std::size_t>(y1.numel())) == 0);
}

TEST_CASE("a corrupted checkpoint is rejected as an ingest error") {
  auto cfg = tiny_cfg();
  Model model = init_model(cfg);
  std::string path = "ckpt_corrupt_test.bin";
  save_checkpoint(path, model, "deadbeef");
  {
    FILE* f = std::fopen(path.c_str(), "r+b");
    REQUIRE(f != nullptr);
    std::fputc('X', f);  // clobber the magic
    std::fclose(f);
  }
  CHECK_THROWS_AS(load_checkpoint(path), IngestError);
  std::remove(path.c_str());
}

TEST_SUITE_END();
