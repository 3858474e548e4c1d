#include <doctest.h>

#include <cmath>
#include <vector>

#include "delta/preprocess.hpp"

using namespace delta;

TEST_SUITE_BEGIN("preprocess");

TEST_CASE("make_patches splits 7x96 into 7x6x16 without copying") {
  Rng rng(3);
  auto w = Tensor::uniform({7, 96}, rng, -1.0, 1.0);
  auto p = make_patches(w, 16);
  REQUIRE(p.shape() == std::vector<int>{7, 6, 16});
  CHECK(p.data() == w.data());
  auto b = Tensor::uniform({2, 7, 96}, rng, -1.0, 1.0);
  auto pb = make_patches(b, 16);
  REQUIRE(pb.shape() == std::vector<int>{2, 7, 6, 16});
}

TEST_CASE("make_patches rejects a lookback not divisible by the patch") {
  auto w = Tensor::zeros({3, 10});
  CHECK_THROWS_AS(make_patches(w, 4), ConfigError);
}

TEST_CASE("revin statistics match the hand-computed values") {
  auto x = Tensor::from_data({1, 1, 3}, {1.0, 2.0, 3.0});
  RevinStats st;
  Tensor none;
  auto y = revin_normalize(x, st, none, none, 1e-5);
  REQUIRE(st.valid);
  CHECK(st.mu.data()[0] == doctest::Approx(2.0).epsilon(1e-15));
  double sigma = std::sqrt(2.0 / 3.0 + 1e-5);
  CHECK(st.sigma.data()[0] == doctest::Approx(sigma).epsilon(1e-15));
  CHECK(y.data()[0] == doctest::Approx(-1.0 / sigma).epsilon(1e-12));
}

TEST_CASE("revin round trip reconstructs the input within 1e-6") {
  Rng rng(17);
  auto x = Tensor::uniform({4, 5, 24}, rng, -50.0, 50.0);
  RevinStats st;
  Tensor none;
  auto y = revin_normalize(x, st, none, none, 1e-5);
  auto back = revin_denormalize(y, st);
  for (long long i = 0; i < x.numel(); ++i)
    CHECK(back.data()[i] == doctest::Approx(x.data()[i]).epsilon(1e-6));
}

TEST_CASE("revin tolerates a zero-variance variable") {
  auto x = Tensor::full({1, 1, 8}, 3.25);
  RevinStats st;
  Tensor none;
  auto y = revin_normalize(x, st, none, none, 1e-5);
  for (long long i = 0; i < y.numel(); ++i) {
    CHECK(std::isfinite(y.data()[i]));
    CHECK(y.data()[i] == doctest::Approx(0.0).epsilon(1e-12));
  }
  auto back = revin_denormalize(y, st);
  for (long long i = 0; i < x.numel(); ++i)
    CHECK(back.data()[i] == doctest::Approx(3.25).epsilon(1e-9));
}

TEST_CASE("revin denormalization applies sigma then mu") {
  auto yhat = Tensor::full({1, 1, 1}, 1.0);
  RevinStats st;
  st.mu = Tensor::full({1, 1}, 5.0);
  st.sigma = Tensor::full({1, 1}, 2.0);
  st.valid = true;
  auto y = revin_denormalize(yhat, st);
  CHECK(y.data()[0] == doctest::Approx(7.0).epsilon(1e-15));
}

TEST_CASE("denormalizing without captured statistics is a contract error") {
  RevinStats st;
  CHECK_THROWS_AS(revin_denormalize(Tensor::zeros({1, 1, 1}), st),
                  ContractError);
}

TEST_CASE("split_by_ratio lands on the expected boundaries") {
  auto s = split_by_ratio(14400, {0.6, 0.2, 0.2}, 96, 96);
  CHECK(s.train.begin == 0);
  CHECK(s.train.end == 8640);
  CHECK(s.val.end == 11520);
  CHECK(s.test.end == 14400);

  auto t = split_by_ratio(10000, {0.7, 0.1, 0.2}, 96, 24);
  CHECK(t.train.end == 7000);
  CHECK(t.val.end == 8000);
  CHECK(t.test.end == 10000);
}

TEST_CASE("a non-empty split shorter than one window is rejected") {
  CHECK_THROWS_AS(split_by_ratio(100, {0.9, 0.05, 0.05}, 96, 24), ConfigError);
}

TEST_CASE("window starts stay inside their range") {
  SplitRanges::Range r{100, 250};
  auto starts = window_starts(r, 96, 24);
  REQUIRE(!starts.empty());
  CHECK(starts.front() == 100);
  CHECK(starts.back() == 250 - 96 - 24);
  CHECK(static_cast<int>(starts.size()) == 250 - 100 - 96 - 24 + 1);
}

TEST_SUITE_END();
