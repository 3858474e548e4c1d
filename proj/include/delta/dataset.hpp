#pragma once

#include <array>
#include <string>
#include <vector>

#include "delta/preprocess.hpp"
#include "delta/tensor.hpp"

namespace delta {

// In-memory multivariate series, variables-major: values is [c, t].
struct TimeSeriesDataset {
  std::string name;
  Tensor values;  // [c, t]
  std::vector<std::string> variable_names;
  std::string frequency;  // informational, e.g. "h" or "15min"
  std::array<double, 3> split_ratios{0.7, 0.1, 0.2};
  std::vector<std::uint8_t> key_mask;  // per-variable; empty when undefined

  // global per-variable standardization (train-split statistics)
  bool zscored = false;
  std::vector<double> z_mu, z_sigma;

  int variables() const { return values.defined() ? values.dim(0) : 0; }
  int length() const { return values.defined() ? values.dim(1) : 0; }
  std::uint64_t checksum() const;
};

// CSV layout: header row, first column a timestamp/index (kept out of the
// values), remaining columns one variable each. Datasets named like the
// ETT family default to 0.6/0.2/0.2 splits; everything else 0.7/0.1/0.2.
TimeSeriesDataset load_csv_dataset(const std::string& path);

SplitRanges dataset_splits(const TimeSeriesDataset& ds, int lookback,
                           int horizon);

// Standardizes each variable in place with mean/std taken from the train
// range only. Constant variables keep sigma = 1. Idempotent guard: throws
// if already applied.
void apply_global_zscore(TimeSeriesDataset& ds, const SplitRanges& splits);

// Gathers windows [starts.size(), c, lookback] and their targets
// [starts.size(), c, horizon] from the series.
struct WindowBatch {
  Tensor inputs;
  Tensor targets;
};
WindowBatch gather_windows(const TimeSeriesDataset& ds,
                           const std::vector<int>& starts, int lookback,
                           int horizon);

}  // namespace delta
