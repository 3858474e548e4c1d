#include "delta/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>

#include <json.hpp>

namespace delta {

Metrics compute_metrics(const Tensor& pred, const Tensor& truth) {
  if (!pred.defined() || !truth.defined())
    throw ContractError("compute_metrics: undefined operand");
  if (pred.shape() != truth.shape())
    throw ContractError("compute_metrics: shapes disagree: " +
                        shape_str(pred.shape()) + " vs " +
                        shape_str(truth.shape()));
  long long n = pred.numel();
  const double* p = pred.data();
  const double* t = truth.data();
  double se = 0.0, ae = 0.0;
  for (long long i = 0; i < n; ++i) {
    double d = p[i] - t[i];
    se += d * d;
    ae += std::fabs(d);
  }
  Metrics m;
  m.mse = se / static_cast<double>(n);
  m.mae = ae / static_cast<double>(n);
  return m;
}

AdamOptimizer::AdamOptimizer(std::vector<Param>& params, double lr,
                             double beta1, double beta2, double eps)
    : params_(&params), lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const auto& p : params) {
    m_.emplace_back(static_cast<std::size_t>(p.value.numel()), 0.0);
    v_.emplace_back(static_cast<std::size_t>(p.value.numel()), 0.0);
  }
}

void AdamOptimizer::step() {
  ++t_;
  double bc1 = 1.0 - std::pow(b1_, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(b2_, static_cast<double>(t_));
  for (std::size_t pi = 0; pi < params_->size(); ++pi) {
    Param& p = (*params_)[pi];
    std::size_t n = static_cast<std::size_t>(p.value.numel());
    const double* g = p.value.grad();
    double* mm = m_[pi].data();
    double* vv = v_[pi].data();
    double* w = p.value.data();
    for (std::size_t i = 0; i < n; ++i) {
      double gi = g ? g[i] : 0.0;
      if (!std::isfinite(gi))
        throw NumericError("adam: non-finite gradient in parameter '" +
                           p.name + "' at element " + std::to_string(i));
      mm[i] = b1_ * mm[i] + (1.0 - b1_) * gi;
      vv[i] = b2_ * vv[i] + (1.0 - b2_) * gi * gi;
      double mhat = mm[i] / bc1;
      double vhat = vv[i] / bc2;
      w[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
  }
}

void AdamOptimizer::zero_grad() {
  for (auto& p : *params_) p.value.zero_grad();
}

double eval_range_mse(const Model& model, const TimeSeriesDataset& ds,
                      const SplitRanges::Range& range, int eval_batch) {
  auto starts =
      window_starts(range, model.cfg.lookback, model.cfg.horizon);
  if (starts.empty())
    throw ContractError("eval_range_mse: range holds no complete window");
  NoGradGuard ng;
  double se = 0.0;
  long long count = 0;
  for (std::size_t off = 0; off < starts.size();
       off += static_cast<std::size_t>(eval_batch)) {
    std::size_t hi = std::min(starts.size(),
                              off + static_cast<std::size_t>(eval_batch));
    std::vector<int> chunk(starts.begin() + static_cast<long>(off),
                           starts.begin() + static_cast<long>(hi));
    WindowBatch bt = gather_windows(ds, chunk, model.cfg.lookback,
                                    model.cfg.horizon);
    Tensor pred = model.forecast(bt.inputs);
    Metrics m = compute_metrics(pred, bt.targets);
    se += m.mse * static_cast<double>(pred.numel());
    count += pred.numel();
  }
  return se / static_cast<double>(count);
}

TrainResult train(Model& model, const TimeSeriesDataset& ds,
                  const SplitRanges& splits, const TrainConfig& tc) {
  if (tc.epochs < 0) throw ConfigError("train: epochs must be >= 0");
  if (tc.batch_size < 1) throw ConfigError("train: batch size must be >= 1");
  auto starts = window_starts(splits.train, model.cfg.lookback,
                              model.cfg.horizon);
  if (starts.empty())
    throw ConfigError("train: train split holds no complete window");
  bool has_val =
      splits.val.length() >= model.cfg.lookback + model.cfg.horizon;

  TrainResult result;
  Rng shuffle_rng(tc.seed);
  AdamOptimizer opt(model.params, tc.lr, tc.beta1, tc.beta2, tc.eps);
  auto& tape = Tape::instance();

  std::vector<Tensor> best;
  double best_val = std::numeric_limits<double>::infinity();

  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    shuffle_rng.shuffle(starts);
    double se = 0.0;
    long long count = 0;
    int batch_index = 0;
    for (std::size_t off = 0; off < starts.size();
         off += static_cast<std::size_t>(tc.batch_size)) {
      std::size_t hi = std::min(
          starts.size(), off + static_cast<std::size_t>(tc.batch_size));
      std::vector<int> chunk(starts.begin() + static_cast<long>(off),
                             starts.begin() + static_cast<long>(hi));
      WindowBatch bt = gather_windows(ds, chunk, model.cfg.lookback,
                                      model.cfg.horizon);
      tape.clear();
      opt.zero_grad();
      Tensor pred = model.forecast(bt.inputs);
      Tensor loss = mse_loss(pred, bt.targets);
      double lv = loss.item();
      if (!std::isfinite(lv))
        throw NumericError("train: non-finite loss at epoch " +
                           std::to_string(epoch) + ", batch " +
                           std::to_string(batch_index));
      backward(loss);
      opt.step();
      tape.clear();
      se += lv * static_cast<double>(pred.numel());
      count += pred.numel();
      ++batch_index;
    }
    EpochStats stats;
    stats.train_mse = se / static_cast<double>(count);
    if (has_val) {
      stats.val_mse = eval_range_mse(model, ds, splits.val);
      if (stats.val_mse < best_val) {
        best_val = stats.val_mse;
        best = model.param_snapshot();
        result.best_epoch = epoch;
        result.best_val_mse = best_val;
      }
    }
    result.history.push_back(stats);
    if (tc.verbose)
      std::fprintf(stderr, "epoch %d  train_mse %.6f  val_mse %.6f\n", epoch,
                   stats.train_mse, stats.val_mse);
  }

  // soft diagnostic only: training loss is usually non-increasing
  for (std::size_t i = 1; i < result.history.size(); ++i)
    if (result.history[i].train_mse >
        result.history[i - 1].train_mse * 1.05) {
      result.warnings.push_back(
          "train MSE rose more than 5% at epoch " + std::to_string(i));
      break;
    }

  if (has_val && !best.empty()) {
    model.param_restore(best);
  } else if (!has_val && tc.epochs > 0) {
    result.best_epoch = tc.epochs - 1;
  }
  return result;
}

EvalResult evaluate(const Model& model, const TimeSeriesDataset& ds,
                    const SplitRanges& splits, int eval_batch) {
  auto starts =
      window_starts(splits.test, model.cfg.lookback, model.cfg.horizon);
  if (starts.empty())
    throw ContractError("evaluate: test split holds no complete window");
  int c = ds.variables();
  int l = model.cfg.lookback, h = model.cfg.horizon;

  // per-variable mean over the train range (of the series as stored)
  std::vector<double> train_mean(static_cast<std::size_t>(c), 0.0);
  {
    const double* v = ds.values.data();
    int tb = splits.train.begin, te = splits.train.end;
    for (int ci = 0; ci < c; ++ci) {
      double acc = 0.0;
      for (int ti = tb; ti < te; ++ti)
        acc += v[static_cast<std::size_t>(ci) * ds.length() + ti];
      train_mean[static_cast<std::size_t>(ci)] = acc / (te - tb);
    }
  }

  NoGradGuard ng;
  EvalResult r;
  double se_m = 0, ae_m = 0, se_r = 0, ae_r = 0, se_t = 0, ae_t = 0;
  long long count = 0;
  for (std::size_t off = 0; off < starts.size();
       off += static_cast<std::size_t>(eval_batch)) {
    std::size_t hi2 = std::min(starts.size(),
                               off + static_cast<std::size_t>(eval_batch));
    std::vector<int> chunk(starts.begin() + static_cast<long>(off),
                           starts.begin() + static_cast<long>(hi2));
    WindowBatch bt = gather_windows(ds, chunk, l, h);
    Tensor pred = model.forecast(bt.inputs);
    int b = bt.inputs.dim(0);
    const double* pp = pred.data();
    const double* tt = bt.targets.data();
    const double* xx = bt.inputs.data();
    for (int bi = 0; bi < b; ++bi)
      for (int ci = 0; ci < c; ++ci) {
        std::size_t tbase = (static_cast<std::size_t>(bi) * c + ci) * h;
        std::size_t xbase = (static_cast<std::size_t>(bi) * c + ci) * l;
        double last = xx[xbase + l - 1];
        double mean = train_mean[static_cast<std::size_t>(ci)];
        for (int k = 0; k < h; ++k) {
          double truth = tt[tbase + k];
          double dm = pp[tbase + k] - truth;
          double dr = last - truth;
          double dt = mean - truth;
          se_m += dm * dm;
          ae_m += std::fabs(dm);
          se_r += dr * dr;
          ae_r += std::fabs(dr);
          se_t += dt * dt;
          ae_t += std::fabs(dt);
        }
      }
    count += pred.numel();
    r.windows += b;
  }
  double n = static_cast<double>(count);
  r.model_metrics = {se_m / n, ae_m / n};
  r.repeat_last = {se_r / n, ae_r / n};
  r.train_mean = {se_t / n, ae_t / n};
  return r;
}

namespace {

constexpr char kCkptMagic[4] = {'D', 'L', 'T', 'C'};
constexpr std::uint32_t kCkptVersion = 1;

nlohmann::json config_to_json(const ModelConfig& cfg) {
  nlohmann::json j;
  j["arch"] = arch_name(cfg.arch);
  j["variables"] = cfg.variables;
  j["lookback"] = cfg.lookback;
  j["horizon"] = cfg.horizon;
  j["patch_len"] = cfg.patch_len;
  j["d_patch"] = cfg.d_patch;
  j["layers"] = cfg.layers;
  j["heads"] = cfg.heads;
  j["expansion"] = cfg.expansion;
  j["funnel_out_mode"] = funnel_out_mode_name(cfg.funnel_out_mode);
  j["funnel_in_op"] = funnel_op_name(cfg.funnel_in_op);
  j["funnel_out_op"] = funnel_op_name(cfg.funnel_out_op);
  j["learned_projections"] = cfg.learned_projections;
  j["outer_residual"] = cfg.outer_residual;
  j["revin_affine"] = cfg.revin_affine;
  j["ln_eps"] = cfg.ln_eps;
  j["revin_eps"] = cfg.revin_eps;
  j["seed"] = cfg.seed;
  return j;
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  ArchSpec spec = parse_arch(j.at("arch").get<std::string>());
  cfg.arch = spec.kind;
  cfg.variables = j.at("variables").get<int>();
  cfg.lookback = j.at("lookback").get<int>();
  cfg.horizon = j.at("horizon").get<int>();
  cfg.patch_len = j.at("patch_len").get<int>();
  cfg.d_patch = j.at("d_patch").get<int>();
  cfg.layers = j.at("layers").get<int>();
  cfg.heads = j.at("heads").get<int>();
  cfg.expansion = j.at("expansion").get<double>();
  cfg.funnel_out_mode =
      parse_funnel_out_mode(j.at("funnel_out_mode").get<std::string>());
  cfg.funnel_in_op = parse_funnel_op(j.at("funnel_in_op").get<std::string>());
  cfg.funnel_out_op =
      parse_funnel_op(j.at("funnel_out_op").get<std::string>());
  cfg.learned_projections = j.at("learned_projections").get<bool>();
  cfg.outer_residual = j.at("outer_residual").get<bool>();
  cfg.revin_affine = j.at("revin_affine").get<bool>();
  cfg.ln_eps = j.at("ln_eps").get<double>();
  cfg.revin_eps = j.at("revin_eps").get<double>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  return cfg;
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model,
                     const std::string& config_hash) {
  nlohmann::json manifest;
  manifest["config"] = config_to_json(model.cfg);
  manifest["config_hash"] = config_hash;
  manifest["format_version"] = kCkptVersion;
  nlohmann::json plist = nlohmann::json::array();
  for (const auto& p : model.params) {
    nlohmann::json pj;
    pj["name"] = p.name;
    pj["shape"] = p.value.shape();
    plist.push_back(pj);
  }
  manifest["params"] = plist;
  std::string mtxt = manifest.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint '" + path + "'");
  out.write(kCkptMagic, 4);
  std::uint32_t ver = kCkptVersion;
  out.write(reinterpret_cast<const char*>(&ver), sizeof(ver));
  std::uint64_t mlen = mtxt.size();
  out.write(reinterpret_cast<const char*>(&mlen), sizeof(mlen));
  out.write(mtxt.data(), static_cast<std::streamsize>(mtxt.size()));
  for (const auto& p : model.params)
    out.write(reinterpret_cast<const char*>(p.value.data()),
              static_cast<std::streamsize>(p.value.numel() *
                                           static_cast<long long>(
                                               sizeof(double))));
  if (!out) throw IoError("short write while saving checkpoint '" + path + "'");
}

Model load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot open checkpoint '" + path + "'");
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kCkptMagic, 4) != 0)
    throw IngestError("'" + path + "' is not a checkpoint (bad magic)");
  std::uint32_t ver = 0;
  in.read(reinterpret_cast<char*>(&ver), sizeof(ver));
  if (!in || ver != kCkptVersion)
    throw IngestError("checkpoint '" + path + "' has format version " +
                      std::to_string(ver) + ", expected " +
                      std::to_string(kCkptVersion));
  std::uint64_t mlen = 0;
  in.read(reinterpret_cast<char*>(&mlen), sizeof(mlen));
  if (!in) throw IngestError("checkpoint '" + path + "' is truncated");
  std::string mtxt(mlen, '\0');
  in.read(mtxt.data(), static_cast<std::streamsize>(mlen));
  if (!in) throw IngestError("checkpoint '" + path + "' is truncated");
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(mtxt);
  } catch (const std::exception& e) {
    throw IngestError("checkpoint '" + path + "' has a corrupt manifest: " +
                      e.what());
  }
  Model model = init_model(config_from_json(manifest.at("config")));
  const auto& plist = manifest.at("params");
  if (plist.size() != model.params.size())
    throw IngestError("checkpoint '" + path + "' carries " +
                      std::to_string(plist.size()) + " parameters, model has " +
                      std::to_string(model.params.size()));
  for (std::size_t i = 0; i < model.params.size(); ++i) {
    auto& p = model.params[i];
    if (plist[i].at("name").get<std::string>() != p.name)
      throw IngestError("checkpoint '" + path + "' parameter order differs (" +
                        plist[i].at("name").get<std::string>() + " vs " +
                        p.name + ")");
    auto shape = plist[i].at("shape").get<std::vector<int>>();
    if (shape != p.value.shape())
      throw IngestError("checkpoint '" + path + "' parameter '" + p.name +
                        "' has shape " + shape_str(shape) + ", model expects " +
                        shape_str(p.value.shape()));
    in.read(reinterpret_cast<char*>(p.value.data()),
            static_cast<std::streamsize>(p.value.numel() *
                                         static_cast<long long>(
                                             sizeof(double))));
    if (!in)
      throw IngestError("checkpoint '" + path +
                        "' is truncated in parameter data");
  }
  return model;
}

}  // namespace delta
