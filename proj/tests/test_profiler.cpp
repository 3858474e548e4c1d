#include <doctest.h>

#include <array>
#include <cmath>
#include <vector>

#include "delta/profiler.hpp"

using namespace delta;

TEST_SUITE_BEGIN("profiler");

TEST_CASE("closed-form attention elements at the reference sizes") {
  // delta with C=321, L=96, P=16: 2*321*6 + 36 = 3888
  CHECK(analytic_attention_elements(ArchKind::delta, 321, 96, 16) == 3888);
  CHECK(analytic_attention_elements(ArchKind::delta, 321, 96, 16,
                                    FunnelOutMode::singleton) == 3888);
  // all-delegates: C*n + n^2 + C*n^2 = 1926 + 36 + 11556
  CHECK(analytic_attention_elements(ArchKind::delta, 321, 96, 16,
                                    FunnelOutMode::all_delegates) == 13518);
  CHECK(analytic_attention_elements(ArchKind::variate_only, 321, 96, 16) ==
        321LL * 321);
  CHECK(analytic_attention_elements(ArchKind::full, 321, 96, 16) ==
        (321LL * 6) * (321LL * 6));
  CHECK(analytic_attention_elements(ArchKind::time_only, 321, 96, 16) ==
        96LL * 96);
}

TEST_CASE("exponent fit recovers planted slopes") {
  std::vector<std::array<double, 2>> quad, lin;
  for (double x : {16.0, 32.0, 64.0, 128.0}) {
    quad.push_back({x, 3.0 * x * x});
    lin.push_back({x, 5.0 * x});
  }
  auto fq = fit_scaling_exponent(quad);
  CHECK(fq.slope == doctest::Approx(2.0).epsilon(1e-9));
  CHECK(fq.residual < 1e-12);
  auto fl = fit_scaling_exponent(lin);
  CHECK(fl.slope == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("exponent fit needs at least three positive points") {
  std::vector<std::array<double, 2>> two{{1.0, 1.0}, {2.0, 2.0}};
  CHECK_THROWS_AS(fit_scaling_exponent(two), ContractError);
  std::vector<std::array<double, 2>> neg{{1.0, 1.0}, {2.0, 2.0}, {3.0, -1.0}};
  CHECK_THROWS_AS(fit_scaling_exponent(neg), ContractError);
}

TEST_CASE("peak memory measurement is deterministic and monotone in C") {
  ModelConfig cfg;
  cfg.arch = ArchKind::delta;
  cfg.lookback = 96;
  cfg.patch_len = 16;
  cfg.d_patch = 16;
  cfg.layers = 1;
  cfg.seed = 2;
  cfg.variables = 32;
  long long a = measure_peak_memory(cfg);
  long long b = measure_peak_memory(cfg);
  CHECK(a == b);
  CHECK(a > 0);
  cfg.variables = 64;
  long long c = measure_peak_memory(cfg);
  CHECK(c > a);
}

TEST_CASE("profile_scaling returns one report per grid point") {
  auto reports = profile_scaling(ArchKind::variate_only, {8, 16, 32}, 96, 16,
                                 16);
  REQUIRE(reports.size() == 3);
  for (const auto& r : reports) {
    CHECK(r.arch == "variate_only");
    CHECK(r.measured_peak_bytes > 0);
    CHECK(r.analytic_score_elements ==
          static_cast<long long>(r.c) * r.c);
    CHECK(r.parameter_count > 0);
  }
  CHECK(reports[1].measured_peak_bytes > reports[0].measured_peak_bytes);
}

TEST_SUITE_END();
