#pragma once

#include <array>
#include <string>
#include <vector>

#include "delta/ops.hpp"
#include "delta/tensor.hpp"

namespace delta {

// Non-overlapping stride-P segmentation of each variable's lookback window.
// Input [c, l] or [b, c, l] -> [c, l/p, p] or [b, c, l/p, p]; zero-copy.
Tensor make_patches(const Tensor& window, int patch_len);

// Per-window, per-variable normalization statistics. mu/sigma: [b, c],
// captured at normalization time and required again for denormalization.
struct RevinStats {
  Tensor mu;
  Tensor sigma;  // sqrt(var + eps), never zero
  bool valid = false;
};

// x: [b, c, l] -> (x - mu) / sigma, optionally gamma * . + beta with
// per-variable affine parameters (shape [c]). x itself is treated as data:
// gradients flow only through gamma/beta.
Tensor revin_normalize(const Tensor& x, RevinStats& stats, const Tensor& gamma,
                       const Tensor& beta, double eps);

// yhat: [b, c, h] -> sigma * yhat + mu using the captured statistics.
Tensor revin_denormalize(const Tensor& yhat, const RevinStats& stats);

// Patch tokens -> model width via a shared linear map.
// grid [..., p], w [p, d], b [d] -> [..., d].
Tensor embed_patches(const Tensor& grid, const Tensor& w, const Tensor& b);

// Contiguous index ranges [begin, end) per split, plus soft warnings
// (e.g. empty validation split under ratios like 1:0:0).
struct SplitRanges {
  struct Range {
    int begin = 0;
    int end = 0;
    int length() const { return end - begin; }
  };
  Range train, val, test;
  std::vector<std::string> warnings;
};

// Chronological split of [0, total) by ratios (normalized internally).
// A non-empty split shorter than lookback + horizon is a config error;
// empty splits are allowed but flagged.
SplitRanges split_by_ratio(int total, std::array<double, 3> ratios,
                           int lookback, int horizon);

// All window start indices s with [s, s + lookback + horizon) inside the
// range; windows never straddle a split boundary.
std::vector<int> window_starts(const SplitRanges::Range& range, int lookback,
                               int horizon);

}  // namespace delta
