#pragma once

#include <array>
#include <string>
#include <vector>

#include "delta/model.hpp"

namespace delta {

// One measured grid point of the scaling study.
struct ComplexityReport {
  std::string arch;
  int c = 0;
  int lookback = 0;
  int patch_len = 0;
  long long analytic_score_elements = 0;  // per layer, batch 1
  long long measured_peak_bytes = 0;
  long long parameter_count = 0;
};

// Attention-score elements one layer evaluates at batch 1, head count 1.
// With n = lookback/patch_len: delta (variable-gate or singleton funnel
// out) 2*C*n + n^2; delta (all-delegates) C*n + n^2 + C*n^2; variate-only
// C^2; full (C*n)^2; time-only lookback^2.
long long analytic_attention_elements(
    ArchKind arch, int c, int lookback, int patch_len,
    FunnelOutMode mode = FunnelOutMode::variable_gate);

// Peak counted buffer bytes over forward+backward of one core block (no
// embedding, no head), fresh parameters, serial backend, baseline-delta
// against the allocations live before the block runs. cfg.layers is
// forced to 1. Deterministic per configuration.
long long measure_peak_memory(const ModelConfig& cfg, int batch = 1);

// Ordinary least squares on (ln x, ln y). residual is the RMS residual in
// log space. Needs at least three strictly positive points.
struct ExponentFit {
  double slope = 0.0;
  double intercept = 0.0;
  double residual = 0.0;
};

ExponentFit fit_scaling_exponent(
    const std::vector<std::array<double, 2>>& points);

// Measures one architecture across a variable-count grid at fixed
// lookback/patch_len (so fixed tokens per variable), batch 1.
std::vector<ComplexityReport> profile_scaling(
    ArchKind arch, const std::vector<int>& c_grid, int lookback,
    int patch_len, int d_patch = 64,
    FunnelOutMode mode = FunnelOutMode::variable_gate);

}  // namespace delta
