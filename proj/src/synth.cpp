#include "delta/synth.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace delta {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// p*n can land a hair above an integer (0.2*10 > 2 in binary); counts that
// close to an integer are taken as that integer, everything else ceils.
int ceil_count(double p, int n) {
  double x = p * static_cast<double>(n);
  double nearest = std::round(x);
  if (std::fabs(x - nearest) < 1e-9) return static_cast<int>(nearest);
  return static_cast<int>(std::ceil(x));
}

std::vector<int> pick_k(Rng& rng, int n, int k) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  rng.shuffle(idx);
  idx.resize(static_cast<std::size_t>(k));
  std::sort(idx.begin(), idx.end());
  return idx;
}

}  // namespace

TimeSeriesDataset gen_keyretrieval_dataset(const KeyRetrievalSpec& spec) {
  if (spec.variables < 1 || spec.length < 1 || spec.lookback < 1 ||
      spec.horizon < 1)
    throw ConfigError("keyretrieval: dimensions must be positive");
  if (spec.n_keys < 0 || spec.n_keys > spec.variables)
    throw ConfigError("keyretrieval: n_keys " + std::to_string(spec.n_keys) +
                      " exceeds variable count " +
                      std::to_string(spec.variables));

  int c = spec.variables, t = spec.length;
  Rng rng(spec.seed);
  TimeSeriesDataset ds;
  ds.name = "keyretrieval";
  ds.frequency = "synthetic";
  ds.values = Tensor::zeros({c, t});
  ds.key_mask.assign(static_cast<std::size_t>(c), 0);
  double* v = ds.values.data();

  for (int k = 0; k < spec.n_keys; ++k) {
    double f = std::exp(rng.uniform(std::log(2.0), std::log(20.0)));
    double phi = rng.uniform01() * kTwoPi;
    ds.key_mask[static_cast<std::size_t>(k)] = 1;
    double* row = v + static_cast<std::size_t>(k) * t;
    for (int ti = 0; ti < t; ++ti)
      row[ti] = std::sin(kTwoPi * f * ti / spec.lookback + phi);
  }
  for (int ci = spec.n_keys; ci < c; ++ci) {
    double* row = v + static_cast<std::size_t>(ci) * t;
    for (int ti = 0; ti < t; ++ti) row[ti] = rng.normal();
  }

  ds.variable_names.reserve(static_cast<std::size_t>(c));
  for (int ci = 0; ci < c; ++ci)
    ds.variable_names.push_back(
        (ci < spec.n_keys ? "key" : "noise") + std::to_string(ci));
  return ds;
}

double key_attention_mass(const AttentionTrace& trace,
                          const std::vector<std::uint8_t>& key_mask,
                          TraceStage stage, int tokens_per_variable,
                          int layer) {
  if (trace.entries.empty())
    throw ContractError(
        "key_attention_mass: trace is empty; forward with tracing enabled");
  if (key_mask.empty())
    throw ContractError("key_attention_mass: key mask is empty");
  if (tokens_per_variable < 1)
    throw ContractError("key_attention_mass: tokens_per_variable must be >= 1");
  std::size_t width = key_mask.size() * static_cast<std::size_t>(
                                            tokens_per_variable);
  double acc = 0.0;
  long long rows = 0;
  for (const auto& e : trace.entries) {
    if (e.stage != stage) continue;
    if (layer >= 0 && e.layer != layer) continue;
    if (e.weights.size() != width)
      throw ContractError("key_attention_mass: traced row holds " +
                          std::to_string(e.weights.size()) +
                          " weights, expected " + std::to_string(width));
    double m = 0.0;
    for (std::size_t vi = 0; vi < key_mask.size(); ++vi) {
      if (!key_mask[vi]) continue;
      std::size_t base = vi * static_cast<std::size_t>(tokens_per_variable);
      for (int j = 0; j < tokens_per_variable; ++j) m += e.weights[base + j];
    }
    acc += m;
    ++rows;
  }
  if (rows == 0)
    throw ContractError("key_attention_mass: no traced rows of stage " +
                        std::string(stage_name(stage)) +
                        (layer >= 0 ? " at layer " + std::to_string(layer)
                                    : std::string()));
  return acc / static_cast<double>(rows);
}

double key_attention_mass(const Model& model, const AttentionTrace& trace,
                          const std::vector<std::uint8_t>& key_mask,
                          int layer) {
  switch (model.cfg.arch) {
    case ArchKind::delta:
      // the only delta softmax whose columns are variables
      return key_attention_mass(trace, key_mask, TraceStage::funnel_in, 1,
                                layer);
    case ArchKind::variate_only:
      return key_attention_mass(trace, key_mask, TraceStage::self, 1, layer);
    case ArchKind::full:
      return key_attention_mass(trace, key_mask, TraceStage::self,
                                model.cfg.patch_count(), layer);
    case ArchKind::time_only:
      break;
  }
  throw ContractError(
      "key_attention_mass: time-token attention carries no variable identity");
}

NoiseReport inject_noise(TimeSeriesDataset& ds, const SplitRanges& splits,
                         const NoiseSpec& spec) {
  if (!ds.values.defined()) throw ContractError("inject_noise: empty dataset");
  if (ds.zscored)
    throw ContractError("inject_noise: corrupt before standardization");
  if (spec.proportion < 0.0 || spec.proportion > 1.0)
    throw ContractError("inject_noise: proportion must lie in [0, 1]");
  if (spec.sigma < 0.0)
    throw ConfigError("inject_noise: sigma must be non-negative");
  int c = ds.variables(), t = ds.length();
  if (splits.train.length() < 1)
    throw ConfigError("inject_noise: empty train range");
  if (splits.train.begin < 0 || splits.train.end > t)
    throw ContractError("inject_noise: train range outside the series");

  NoiseReport report;
  int kv = ceil_count(spec.proportion, c);
  int kt = ceil_count(spec.proportion, t);
  Rng rng(spec.seed);
  report.variables = pick_k(rng, c, kv);
  report.positions = pick_k(rng, t, kt);

  double* v = ds.values.data();
  int tb = splits.train.begin, te = splits.train.end;
  for (int ci : report.variables) {
    double* row = v + static_cast<std::size_t>(ci) * t;
    double mean = 0.0;
    for (int ti = tb; ti < te; ++ti) mean += row[ti];
    mean /= (te - tb);
    double var = 0.0;
    for (int ti = tb; ti < te; ++ti) {
      double d = row[ti] - mean;
      var += d * d;
    }
    double amp = spec.sigma * std::sqrt(var / (te - tb));
    for (int ti : report.positions) row[ti] += rng.normal(0.0, 1.0) * amp;
  }
  return report;
}

namespace {

AttentionTrace trace_windows(const Model& model, const TimeSeriesDataset& ds,
                             const SplitRanges::Range& range,
                             int max_windows) {
  auto starts = window_starts(range, model.cfg.lookback, model.cfg.horizon);
  if (starts.empty())
    throw ContractError("trace_windows: range holds no complete window");
  std::vector<int> picked;
  if (static_cast<int>(starts.size()) <= max_windows) {
    picked = starts;
  } else {
    std::size_t stride = starts.size() / static_cast<std::size_t>(max_windows);
    for (int i = 0; i < max_windows; ++i)
      picked.push_back(starts[static_cast<std::size_t>(i) * stride]);
  }
  WindowBatch bt =
      gather_windows(ds, picked, model.cfg.lookback, model.cfg.horizon);
  NoGradGuard ng;
  AttentionTrace trace;
  trace.enabled = true;
  ForwardContext ctx;
  ctx.trace = &trace;
  (void)model.forecast(bt.inputs, &ctx);
  return trace;
}

}  // namespace

double measure_key_attention_mass(const Model& model,
                                  const TimeSeriesDataset& ds,
                                  const SplitRanges::Range& range,
                                  int max_windows, int layer) {
  if (ds.key_mask.empty())
    throw ContractError("measure_key_attention_mass: dataset has no key mask");
  AttentionTrace trace = trace_windows(model, ds, range, max_windows);
  return key_attention_mass(model, trace, ds.key_mask, layer);
}

KeyRetrievalRun run_keyretrieval(const KeyRetrievalSpec& spec_in,
                                 const ModelConfig& cfg_in,
                                 const TrainConfig& tc_in,
                                 std::uint64_t seed) {
  KeyRetrievalSpec spec = spec_in;
  spec.seed = seed;
  TimeSeriesDataset ds = gen_keyretrieval_dataset(spec);

  ModelConfig cfg = cfg_in;
  cfg.variables = ds.variables();
  cfg.lookback = spec.lookback;
  cfg.horizon = spec.horizon;
  cfg.seed = seed;
  SplitRanges splits = dataset_splits(ds, cfg.lookback, cfg.horizon);
  apply_global_zscore(ds, splits);
  Model model = init_model(cfg);

  TrainConfig tc = tc_in;
  tc.seed = seed;
  train(model, ds, splits, tc);

  KeyRetrievalRun run;
  run.arch = arch_name(cfg.arch);
  run.seed = seed;
  AttentionTrace trace = trace_windows(model, ds, splits.test, 32);
  run.attention_mass = key_attention_mass(model, trace, ds.key_mask, -1);
  run.attention_mass_layer0 = key_attention_mass(model, trace, ds.key_mask, 0);
  run.test_mse = eval_range_mse(model, ds, splits.test);
  return run;
}

std::vector<NoiseSweepPoint> noise_sweep(
    const TimeSeriesDataset& clean, const ModelConfig& cfg_in,
    const TrainConfig& tc_in, const std::vector<ArchKind>& archs,
    const std::vector<double>& levels, const std::vector<std::uint64_t>& seeds,
    double sigma) {
  if (clean.zscored)
    throw ContractError("noise_sweep: pass the raw series, not a standardized one");
  std::vector<NoiseSweepPoint> points;
  for (ArchKind arch : archs) {
    for (std::uint64_t seed : seeds) {
      std::size_t first = points.size();
      double base = std::numeric_limits<double>::quiet_NaN();
      for (double p : levels) {
        TimeSeriesDataset noisy = clean;
        noisy.values = clean.values.clone();
        noisy.zscored = false;
        noisy.z_mu.clear();
        noisy.z_sigma.clear();

        ModelConfig cfg = cfg_in;
        cfg.arch = arch;
        cfg.variables = noisy.variables();
        cfg.seed = seed;
        SplitRanges splits = dataset_splits(noisy, cfg.lookback, cfg.horizon);

        NoiseSpec ns;
        ns.proportion = p;
        ns.sigma = sigma;
        // level-and-seed keyed so every architecture sees identical data
        ns.seed = seed * 1000003ull +
                  static_cast<std::uint64_t>(std::llround(p * 100.0)) * 7919ull;
        inject_noise(noisy, splits, ns);
        apply_global_zscore(noisy, splits);

        Model model = init_model(cfg);
        TrainConfig tc = tc_in;
        tc.seed = seed;
        train(model, noisy, splits, tc);

        NoiseSweepPoint pt;
        pt.arch = arch_name(arch);
        pt.proportion = p;
        pt.seed = seed;
        pt.mse = eval_range_mse(model, noisy, splits.test);
        if (p == 0.0) base = pt.mse;
        points.push_back(pt);
      }
      for (std::size_t i = first; i < points.size(); ++i)
        points[i].growth = (points[i].mse - base) / base;
    }
  }
  return points;
}

TimeSeriesDataset gen_ett_like_dataset(int variables, int length,
                                       std::uint64_t seed) {
  if (variables < 1 || length < 2)
    throw ConfigError("ett_like: dimensions must be positive");
  Rng rng(seed);
  TimeSeriesDataset ds;
  ds.name = "etth1-shape";
  ds.frequency = "h";
  ds.split_ratios = {0.6, 0.2, 0.2};
  ds.values = Tensor::zeros({variables, length});
  // Channels co-move like load curves: one daily/weekly phase for the whole
  // site plus a slow stochastic load factor every channel loads on. Drawn
  // before the per-channel streams so the factor path does not depend on the
  // channel count.
  double phi = rng.uniform01() * kTwoPi;
  double psi = rng.uniform01() * kTwoPi;
  std::vector<double> factor(length);
  double f = 0.0;
  for (int ti = 0; ti < length; ++ti) {
    f = 0.95 * f + rng.normal(0.0, 0.3);
    factor[ti] = f;
  }
  double* v = ds.values.data();
  for (int ci = 0; ci < variables; ++ci) {
    double daily_amp = rng.uniform(0.5, 2.0);
    double weekly_amp = rng.uniform(0.2, 1.0);
    double jitter = rng.uniform(-0.3, 0.3);
    double loading = rng.uniform(0.5, 1.5);
    double offset = rng.uniform(-2.0, 2.0);
    double trend = rng.uniform(-1.0, 1.0);
    double innov_sd = rng.uniform(0.2, 0.6);
    double ar = 0.0;
    double* row = v + static_cast<std::size_t>(ci) * length;
    for (int ti = 0; ti < length; ++ti) {
      ar = 0.7 * ar + rng.normal(0.0, innov_sd);
      row[ti] = offset +
                daily_amp * std::sin(kTwoPi * ti / 24.0 + phi + jitter) +
                weekly_amp * std::sin(kTwoPi * ti / 168.0 + psi) +
                loading * factor[ti] +
                trend * (static_cast<double>(ti) / length) + ar;
    }
    ds.variable_names.push_back("v" + std::to_string(ci));
  }
  return ds;
}

}  // namespace delta
