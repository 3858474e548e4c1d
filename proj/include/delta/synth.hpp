#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "delta/dataset.hpp"
#include "delta/model.hpp"
#include "delta/train.hpp"

namespace delta {

// Signal-vs-noise benchmark: the first n_keys variables carry sinusoids
// value[k][t] = sin(2*pi*f_k*t/lookback + phi_k), with f_k log-uniform in
// [2, 20] cycles per window and phi_k uniform in [0, 2*pi); every other
// variable is seeded standard-normal noise. Bitwise pure in its seed.
struct KeyRetrievalSpec {
  int variables = 64;
  int n_keys = 8;
  int length = 2000;
  int lookback = 96;
  int horizon = 24;
  std::uint64_t seed = 42;
};

TimeSeriesDataset gen_keyretrieval_dataset(const KeyRetrievalSpec& spec);

// Fraction of attention weight landing on key variables, averaged with
// equal weight over every traced row of the given stage (all layers when
// layer < 0). Rows are softmax rows whose width must equal
// key_mask.size() * tokens_per_variable; for token widths above one,
// tokens of one variable occupy a contiguous run (variable-major).
double key_attention_mass(const AttentionTrace& trace,
                          const std::vector<std::uint8_t>& key_mask,
                          TraceStage stage, int tokens_per_variable = 1,
                          int layer = -1);

// Stage and token width chosen from the architecture: funnel-in rows for
// the delta model (the only delta softmax ranging over variables), self
// rows for the variate and full baselines. Time-token attention carries
// no variable identity and is rejected.
double key_attention_mass(const Model& model, const AttentionTrace& trace,
                          const std::vector<std::uint8_t>& key_mask,
                          int layer = -1);

// Structured corruption: exactly ceil(p*C) variables times ceil(p*T) time
// positions (one seeded grid) receive additive Normal(0, (sigma*std_c)^2)
// noise, where std_c is the variable's train-range std of the raw series.
// Applied before normalization; the complement is bitwise untouched.
struct NoiseSpec {
  double proportion = 0.0;
  double sigma = 1.0;
  std::uint64_t seed = 0;
};

struct NoiseReport {
  std::vector<int> variables;
  std::vector<int> positions;
};

NoiseReport inject_noise(TimeSeriesDataset& ds, const SplitRanges& splits,
                         const NoiseSpec& spec);

// Forwards up to max_windows evenly spaced windows of the range with
// tracing on and returns the key-attention mass (no grad).
double measure_key_attention_mass(const Model& model,
                                  const TimeSeriesDataset& ds,
                                  const SplitRanges::Range& range,
                                  int max_windows = 32, int layer = -1);

// One key-retrieval study point: generate, train, measure.
struct KeyRetrievalRun {
  std::string arch;
  std::uint64_t seed = 0;
  double attention_mass = 0.0;         // all layers
  double attention_mass_layer0 = 0.0;  // first layer only
  double test_mse = 0.0;
};

KeyRetrievalRun run_keyretrieval(const KeyRetrievalSpec& spec_in,
                                 const ModelConfig& cfg_in,
                                 const TrainConfig& tc_in,
                                 std::uint64_t seed);

// Noise-robustness sweep: per (arch, seed, level) the clean series is
// copied, corrupted at that level, standardized, and a fresh model is
// trained and scored on the test split. Corruption seeds depend on
// (seed, level) only, so every architecture sees identical data. Growth
// is relative to the same (arch, seed) at p = 0 (NaN when 0 is absent).
struct NoiseSweepPoint {
  std::string arch;
  double proportion = 0.0;
  std::uint64_t seed = 0;
  double mse = 0.0;
  double growth = 0.0;
};

std::vector<NoiseSweepPoint> noise_sweep(const TimeSeriesDataset& clean,
                                         const ModelConfig& cfg_in,
                                         const TrainConfig& tc_in,
                                         const std::vector<ArchKind>& archs,
                                         const std::vector<double>& levels,
                                         const std::vector<std::uint64_t>& seeds,
                                         double sigma = 1.0);

// Hourly multivariate series with ETT-like structure: daily and weekly
// sinusoids, a mild trend, and AR(1) noise per variable. Split 0.6/0.2/0.2.
TimeSeriesDataset gen_ett_like_dataset(int variables = 7, int length = 14400,
                                       std::uint64_t seed = 7);

}  // namespace delta
