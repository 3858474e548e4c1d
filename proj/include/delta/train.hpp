#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "delta/dataset.hpp"
#include "delta/model.hpp"

namespace delta {

struct TrainConfig {
  double lr = 1e-3;
  int batch_size = 128;
  int epochs = 10;
  std::uint64_t seed = 42;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  bool verbose = false;  // one status line per epoch on stderr
};

struct Metrics {
  double mse = 0.0;
  double mae = 0.0;
};

// Elementwise means over identically shaped tensors.
Metrics compute_metrics(const Tensor& pred, const Tensor& truth);

// Bias-corrected Adam over a model's registered parameters. Moment buffers
// are owned here, keyed by registration order.
class AdamOptimizer {
 public:
  AdamOptimizer(std::vector<Param>& params, double lr, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8);

  // Applies one update from the parameters' current gradients. Parameters
  // without an accumulated gradient this step are still decayed through
  // their moments. Non-finite gradients abort with the parameter's name.
  void step();
  void zero_grad();
  long long steps_taken() const { return t_; }

 private:
  std::vector<Param>* params_;
  std::vector<Buffer> m_, v_;
  double lr_, b1_, b2_, eps_;
  long long t_ = 0;
};

struct EpochStats {
  double train_mse = 0.0;
  double val_mse = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
  std::vector<EpochStats> history;
  int best_epoch = -1;  // 0-based epoch whose weights the model now holds
  double best_val_mse = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::string> warnings;
};

// Seeded-shuffle epochs over every valid train-split window. When a
// validation split exists the model is left holding the weights of its
// best validation epoch; otherwise the final weights.
TrainResult train(Model& model, const TimeSeriesDataset& ds,
                  const SplitRanges& splits, const TrainConfig& tc);

struct EvalResult {
  Metrics model_metrics;
  Metrics repeat_last;  // horizon filled with the window's final value
  Metrics train_mean;   // horizon filled with the train-split mean
  long long windows = 0;
};

// Test-split evaluation plus the two naive reference forecasters computed
// over the same windows.
EvalResult evaluate(const Model& model, const TimeSeriesDataset& ds,
                    const SplitRanges& splits, int eval_batch = 256);

// Mean MSE of the model over all windows of a range (no grad).
double eval_range_mse(const Model& model, const TimeSeriesDataset& ds,
                      const SplitRanges::Range& range, int eval_batch = 256);

// Versioned binary checkpoint: magic, format version, a JSON manifest
// (config, seed, parameter shapes, config hash), then raw parameter data.
void save_checkpoint(const std::string& path, const Model& model,
                     const std::string& config_hash);
Model load_checkpoint(const std::string& path);

}  // namespace delta
