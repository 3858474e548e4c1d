#include <cstdio>
#include <cstdlib>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "delta/config.hpp"
#include "delta/dataset.hpp"
#include "delta/model.hpp"
#include "delta/profiler.hpp"
#include "delta/report.hpp"
#include "delta/synth.hpp"
#include "delta/train.hpp"

namespace {

using namespace delta;
using nlohmann::json;

// key -> raw value, filled only by flags the user actually passed so they
// override the config file without defaults clobbering it
using Overrides = std::map<std::string, std::string>;

void add_config_flags(CLI::App* sub, Overrides& over) {
  static const struct {
    const char* flag;
    const char* key;
    const char* help;
  } kFlags[] = {
      {"--arch", "arch", "architecture label"},
      {"--lookback", "lookback", "input window length"},
      {"--horizon", "horizon", "forecast length"},
      {"--patch-length", "patch_length", "time steps per patch"},
      {"--d-patch", "d_patch", "patch embedding width"},
      {"--layers", "layers", "encoder depth"},
      {"--heads", "heads", "attention heads"},
      {"--expansion-factor", "expansion_factor", "delegate width multiplier"},
      {"--funnel-out-mode", "funnel_out_mode",
       "variable_gate | all_delegates | singleton"},
      {"--funnel-in-op", "funnel_in_op", "attention | mlp | linear"},
      {"--funnel-out-op", "funnel_out_op", "attention | mlp | linear"},
      {"--learned-projections", "learned_projections",
       "q/k/v maps in the delta stages"},
      {"--outer-residual", "outer_residual", "add layer input to its output"},
      {"--revin-affine", "revin_affine", "learned scale/shift after RevIN"},
      {"--global-zscore", "global_zscore",
       "standardize with train-split statistics"},
      {"--learning-rate,--lr", "learning_rate", "Adam step size"},
      {"--batch-size", "batch_size", "windows per optimizer step"},
      {"--epochs", "epochs", "training epochs"},
      {"--seed", "seed", "run seed (DELTA_SEED env wins)"},
      {"--loss", "loss", "training loss (mse)"},
  };
  for (const auto& f : kFlags) {
    std::string key = f.key;
    sub->add_option_function<std::string>(
        f.flag, [&over, key](const std::string& v) { over[key] = v; }, f.help);
  }
}

RunConfig build_run_config(const std::string& config_file,
                           const Overrides& over) {
  RunConfig rc;
  if (!config_file.empty()) rc = load_config_file(config_file, rc);
  for (const auto& [key, value] : over) apply_config_entry(rc, key, value);
  if (const char* env = std::getenv("DELTA_SEED")) {
    try {
      apply_config_entry(rc, "seed", env);
    } catch (const ConfigError& e) {
      throw ConfigError(std::string("environment DELTA_SEED: ") + e.what());
    }
  }
  return rc;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::size_t b = 0;
  while (b <= s.size()) {
    std::size_t e = s.find(',', b);
    if (e == std::string::npos) e = s.size();
    std::string item = s.substr(b, e - b);
    std::size_t lo = item.find_first_not_of(" \t");
    std::size_t hi = item.find_last_not_of(" \t");
    if (lo != std::string::npos) out.push_back(item.substr(lo, hi - lo + 1));
    b = e + 1;
    if (e == s.size()) break;
  }
  return out;
}

// "256:4096:x2" geometric, or a comma list of values
std::vector<int> parse_grid(const std::string& s) {
  std::vector<int> grid;
  if (s.find(':') != std::string::npos) {
    auto parts = split_list(s);
    if (parts.size() != 1)
      throw ConfigError("grid '" + s + "': mix of ':' and ',' forms");
    std::size_t c1 = s.find(':');
    std::size_t c2 = s.find(':', c1 + 1);
    if (c2 == std::string::npos)
      throw ConfigError("grid '" + s + "': expected start:end:xFACTOR");
    std::string fs = s.substr(c2 + 1);
    if (fs.empty() || fs[0] != 'x')
      throw ConfigError("grid '" + s + "': factor must look like x2");
    long start = std::atol(s.substr(0, c1).c_str());
    long end = std::atol(s.substr(c1 + 1, c2 - c1 - 1).c_str());
    long factor = std::atol(fs.substr(1).c_str());
    if (start < 1 || end < start || factor < 2)
      throw ConfigError("grid '" + s + "': need 1 <= start <= end, factor >= 2");
    for (long v = start; v <= end; v *= factor)
      grid.push_back(static_cast<int>(v));
  } else {
    for (const auto& item : split_list(s)) {
      int v = std::atoi(item.c_str());
      if (v < 1) throw ConfigError("grid '" + s + "': entries must be >= 1");
      grid.push_back(v);
    }
  }
  if (grid.empty()) throw ConfigError("grid '" + s + "' is empty");
  return grid;
}

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
  std::vector<std::uint64_t> seeds;
  for (const auto& item : split_list(s))
    seeds.push_back(std::strtoull(item.c_str(), nullptr, 10));
  if (seeds.empty()) throw ConfigError("seed list '" + s + "' is empty");
  return seeds;
}

json metrics_json(const Metrics& m) {
  return json{{"mse", m.mse}, {"mae", m.mae}};
}

// ---------------------------------------------------------------- train

struct TrainArgs {
  std::string data, config_file, out_dir = ".";
  Overrides over;
};

int cmd_train(const TrainArgs& a) {
  RunManifest man;
  man.command = "train";
  man.started_at = iso8601_utc_now();
  RunConfig rc = build_run_config(a.config_file, a.over);
  man.config_hash = hex64(config_hash(rc));
  man.seed = rc.train.seed;

  TimeSeriesDataset ds = load_csv_dataset(a.data);
  man.data_checksum = hex64(ds.checksum());
  rc.model.variables = ds.variables();
  SplitRanges splits = dataset_splits(ds, rc.model.lookback, rc.model.horizon);
  if (rc.global_zscore) apply_global_zscore(ds, splits);

  Model model = init_model(rc.model);
  TrainResult tr = train(model, ds, splits, rc.train);
  EvalResult ev = evaluate(model, ds, splits);

  std::string ckpt_path = a.out_dir + "/checkpoint.bin";
  std::string report_path = a.out_dir + "/train_report.json";
  save_checkpoint(ckpt_path, model, hex64(config_hash(rc)));
  man.outputs = {ckpt_path, report_path};

  json body;
  body["dataset"] = ds.name;
  body["variables"] = ds.variables();
  body["config"] = canonical_config(rc);
  json hist = json::array();
  for (std::size_t i = 0; i < tr.history.size(); ++i) {
    json e;
    e["epoch"] = i;
    e["train_mse"] = tr.history[i].train_mse;
    if (std::isfinite(tr.history[i].val_mse))
      e["val_mse"] = tr.history[i].val_mse;
    hist.push_back(std::move(e));
  }
  body["history"] = std::move(hist);
  body["best_epoch"] = tr.best_epoch;
  if (std::isfinite(tr.best_val_mse)) body["best_val_mse"] = tr.best_val_mse;
  body["test"] = metrics_json(ev.model_metrics);
  body["baseline_repeat_last"] = metrics_json(ev.repeat_last);
  body["baseline_train_mean"] = metrics_json(ev.train_mean);
  body["test_windows"] = ev.windows;
  if (!tr.warnings.empty()) body["warnings"] = tr.warnings;
  man.finished_at = iso8601_utc_now();
  write_json_report(report_path, man, body);

  std::printf("test mse %.6f mae %.6f | repeat-last mse %.6f | train-mean mse %.6f\n",
              ev.model_metrics.mse, ev.model_metrics.mae, ev.repeat_last.mse,
              ev.train_mean.mse);
  std::printf("wrote %s and %s\n", ckpt_path.c_str(), report_path.c_str());
  return 0;
}

// ----------------------------------------------------------------- eval

struct EvalArgs {
  std::string data, checkpoint, out_dir = ".";
  bool no_zscore = false;
};

int cmd_eval(const EvalArgs& a) {
  RunManifest man;
  man.command = "eval";
  man.started_at = iso8601_utc_now();
  Model model = load_checkpoint(a.checkpoint);
  RunConfig rc;
  rc.model = model.cfg;
  man.config_hash = hex64(config_hash(rc));
  man.seed = model.cfg.seed;

  TimeSeriesDataset ds = load_csv_dataset(a.data);
  man.data_checksum = hex64(ds.checksum());
  if (ds.variables() != model.cfg.variables)
    throw ContractError("eval: dataset has " + std::to_string(ds.variables()) +
                        " variables, checkpoint expects " +
                        std::to_string(model.cfg.variables));
  SplitRanges splits = dataset_splits(ds, model.cfg.lookback,
                                      model.cfg.horizon);
  if (!a.no_zscore) apply_global_zscore(ds, splits);
  EvalResult ev = evaluate(model, ds, splits);

  std::string report_path = a.out_dir + "/eval_report.json";
  man.outputs = {report_path};
  json body;
  body["dataset"] = ds.name;
  body["checkpoint"] = a.checkpoint;
  body["test"] = metrics_json(ev.model_metrics);
  body["baseline_repeat_last"] = metrics_json(ev.repeat_last);
  body["baseline_train_mean"] = metrics_json(ev.train_mean);
  body["test_windows"] = ev.windows;
  man.finished_at = iso8601_utc_now();
  write_json_report(report_path, man, body);
  std::printf("test mse %.6f mae %.6f over %lld windows\n",
              ev.model_metrics.mse, ev.model_metrics.mae,
              static_cast<long long>(ev.windows));
  std::printf("wrote %s\n", report_path.c_str());
  return 0;
}

// ------------------------------------------------- synth-keyretrieval

struct KeyRetArgs {
  std::string c_grid = "64", seeds = "1,2,3", archs = "delta,variate_only";
  int keys = 8, length = 2000, lookback = 96, horizon = 24;
  std::string config_file, out_dir = ".";
  Overrides over;
};

int cmd_keyretrieval(const KeyRetArgs& a) {
  RunManifest man;
  man.command = "synth-keyretrieval";
  man.started_at = iso8601_utc_now();

  RunConfig rc = build_run_config(a.config_file, a.over);
  // desk-scale defaults unless the user said otherwise
  if (!a.over.count("patch_length") && a.config_file.empty())
    rc.model.patch_len = 16;
  if (!a.over.count("d_patch") && a.config_file.empty()) rc.model.d_patch = 8;
  if (!a.over.count("epochs") && a.config_file.empty()) rc.train.epochs = 6;
  if (!a.over.count("batch_size") && a.config_file.empty())
    rc.train.batch_size = 32;
  man.config_hash = hex64(config_hash(rc));

  auto c_grid = parse_grid(a.c_grid);
  auto seeds = parse_seeds(a.seeds);
  man.seed = seeds.front();

  std::vector<std::vector<std::string>> rows;
  json runs = json::array();
  std::map<std::string, std::pair<double, int>> mass_acc;
  for (const auto& arch_label : split_list(a.archs)) {
    ArchSpec spec = parse_arch(arch_label);
    for (int c : c_grid) {
      KeyRetrievalSpec ks;
      ks.variables = c;
      ks.n_keys = a.keys;
      ks.length = a.length;
      ks.lookback = a.lookback;
      ks.horizon = a.horizon;
      ModelConfig cfg = rc.model;
      cfg.arch = spec.kind;
      cfg.funnel_in_op = spec.funnel_in_op;
      cfg.funnel_out_op = spec.funnel_out_op;
      for (std::uint64_t seed : seeds) {
        KeyRetrievalRun run = run_keyretrieval(ks, cfg, rc.train, seed);
        std::printf("arch=%s C=%d seed=%llu mass=%.4f mass_layer0=%.4f test_mse=%.4f\n",
                    run.arch.c_str(), c,
                    static_cast<unsigned long long>(seed), run.attention_mass,
                    run.attention_mass_layer0, run.test_mse);
        std::string cs = std::to_string(c);
        std::string ss = std::to_string(seed);
        rows.push_back({run.arch, cs, ss, "attention_mass",
                        fmt_double(run.attention_mass)});
        rows.push_back({run.arch, cs, ss, "attention_mass_layer0",
                        fmt_double(run.attention_mass_layer0)});
        rows.push_back({run.arch, cs, ss, "test_mse",
                        fmt_double(run.test_mse)});
        json r;
        r["arch"] = run.arch;
        r["variables"] = c;
        r["seed"] = seed;
        r["attention_mass"] = run.attention_mass;
        r["attention_mass_layer0"] = run.attention_mass_layer0;
        r["test_mse"] = run.test_mse;
        runs.push_back(std::move(r));
        auto& acc = mass_acc[run.arch + "/C" + cs];
        acc.first += run.attention_mass;
        acc.second += 1;
      }
    }
  }

  std::string csv_path = a.out_dir + "/keyretrieval.csv";
  std::string json_path = a.out_dir + "/keyretrieval.json";
  man.outputs = {csv_path, json_path};
  man.finished_at = iso8601_utc_now();
  write_csv_report(csv_path, man, {"arch", "C_or_p", "seed", "metric", "value"},
                   rows);
  json body;
  body["n_keys"] = a.keys;
  body["runs"] = std::move(runs);
  json means;
  for (const auto& [k, acc] : mass_acc) means[k] = acc.first / acc.second;
  body["mean_attention_mass"] = std::move(means);
  write_json_report(json_path, man, body);
  std::printf("wrote %s and %s\n", csv_path.c_str(), json_path.c_str());
  return 0;
}

// -------------------------------------------------------- noise-sweep

struct NoiseArgs {
  std::string data, levels = "0,0.4,0.8", seeds = "1,2,3",
              archs = "delta,full";
  double sigma = 1.0;
  std::string config_file, out_dir = ".";
  Overrides over;
};

int cmd_noise_sweep(const NoiseArgs& a) {
  RunManifest man;
  man.command = "noise-sweep";
  man.started_at = iso8601_utc_now();
  RunConfig rc = build_run_config(a.config_file, a.over);
  man.config_hash = hex64(config_hash(rc));

  TimeSeriesDataset ds = load_csv_dataset(a.data);
  man.data_checksum = hex64(ds.checksum());

  std::vector<ArchKind> archs;
  for (const auto& label : split_list(a.archs)) {
    ArchSpec spec = parse_arch(label);
    if (label != arch_name(spec.kind))
      throw ConfigError("noise-sweep: use family architectures, got '" +
                        label + "'");
    archs.push_back(spec.kind);
  }
  std::vector<double> levels;
  for (const auto& item : split_list(a.levels)) {
    double p = std::atof(item.c_str());
    if (p < 0.0 || p > 1.0)
      throw ConfigError("noise-sweep: level '" + item + "' outside [0, 1]");
    levels.push_back(p);
  }
  auto seeds = parse_seeds(a.seeds);
  man.seed = seeds.front();

  auto points = noise_sweep(ds, rc.model, rc.train, archs, levels, seeds,
                            a.sigma);

  std::vector<std::vector<std::string>> rows;
  json parr = json::array();
  for (const auto& pt : points) {
    std::printf("arch=%s p=%.2f seed=%llu mse=%.6f growth=%+.2f%%\n",
                pt.arch.c_str(), pt.proportion,
                static_cast<unsigned long long>(pt.seed), pt.mse,
                100.0 * pt.growth);
    std::string ps = fmt_double(pt.proportion);
    std::string ss = std::to_string(pt.seed);
    rows.push_back({pt.arch, ps, ss, "mse", fmt_double(pt.mse)});
    rows.push_back({pt.arch, ps, ss, "growth", fmt_double(pt.growth)});
    json r;
    r["arch"] = pt.arch;
    r["proportion"] = pt.proportion;
    r["seed"] = pt.seed;
    r["mse"] = pt.mse;
    r["growth"] = pt.growth;
    parr.push_back(std::move(r));
  }

  std::string csv_path = a.out_dir + "/noise_sweep.csv";
  std::string json_path = a.out_dir + "/noise_sweep.json";
  man.outputs = {csv_path, json_path};
  man.finished_at = iso8601_utc_now();
  write_csv_report(csv_path, man, {"arch", "C_or_p", "seed", "metric", "value"},
                   rows);
  json body;
  body["sigma"] = a.sigma;
  body["points"] = std::move(parr);
  write_json_report(json_path, man, body);
  std::printf("wrote %s and %s\n", csv_path.c_str(), json_path.c_str());
  return 0;
}

// ------------------------------------------------------------ profile

struct ProfileArgs {
  std::string archs = "delta,variate_only,full,time_only";
  std::string c_grid = "256:4096:x2";
  int tokens = 6, patch_length = 16, d_patch = 64;
  int full_max_c = 1024;
  std::string out_dir = ".";
};

int cmd_profile(const ProfileArgs& a) {
  RunManifest man;
  man.command = "profile";
  man.started_at = iso8601_utc_now();
  man.config_hash = hex64(fnv1a(a.c_grid.data(), a.c_grid.size()));

  auto grid = parse_grid(a.c_grid);
  int lookback = a.tokens * a.patch_length;

  std::vector<std::vector<std::string>> rows;
  json exponents;
  json points = json::array();
  for (const auto& label : split_list(a.archs)) {
    ArchSpec spec = parse_arch(label);
    if (label != arch_name(spec.kind))
      throw ConfigError("profile: use family architectures, got '" + label +
                        "'");
    std::vector<int> arch_grid;
    for (int c : grid) {
      if (spec.kind == ArchKind::full && a.full_max_c > 0 &&
          c > a.full_max_c) {
        std::fprintf(stderr,
                     "profile: skipping full at C=%d (cap %d, quadratic "
                     "activation cost)\n",
                     c, a.full_max_c);
        continue;
      }
      arch_grid.push_back(c);
    }
    auto reports = profile_scaling(spec.kind, arch_grid, lookback,
                                   a.patch_length, a.d_patch);
    std::vector<std::array<double, 2>> fitpts;
    for (const auto& r : reports) {
      rows.push_back({r.arch, std::to_string(r.c), std::to_string(r.lookback),
                      std::to_string(r.patch_len),
                      std::to_string(r.analytic_score_elements),
                      std::to_string(r.measured_peak_bytes),
                      std::to_string(r.parameter_count)});
      fitpts.push_back({static_cast<double>(r.c),
                        static_cast<double>(r.measured_peak_bytes)});
      json p;
      p["arch"] = r.arch;
      p["c"] = r.c;
      p["analytic_score_elements"] = r.analytic_score_elements;
      p["peak_bytes"] = r.measured_peak_bytes;
      p["parameter_count"] = r.parameter_count;
      points.push_back(std::move(p));
      std::printf("arch=%s C=%d peak_bytes=%lld analytic=%lld\n",
                  r.arch.c_str(), r.c, r.measured_peak_bytes,
                  r.analytic_score_elements);
    }
    if (fitpts.size() >= 3) {
      ExponentFit fit = fit_scaling_exponent(fitpts);
      json f;
      f["slope"] = fit.slope;
      f["intercept"] = fit.intercept;
      f["residual"] = fit.residual;
      f["points"] = fitpts.size();
      exponents[arch_name(spec.kind)] = std::move(f);
      std::printf("arch=%s exponent=%.3f (rms residual %.3f, %zu points)\n",
                  arch_name(spec.kind), fit.slope, fit.residual,
                  fitpts.size());
    }
  }

  std::string csv_path = a.out_dir + "/profile.csv";
  std::string json_path = a.out_dir + "/profile.json";
  man.outputs = {csv_path, json_path};
  man.finished_at = iso8601_utc_now();
  write_csv_report(
      csv_path, man,
      {"arch", "C", "L", "P", "analytic_elements", "peak_bytes", "params"},
      rows);
  json body;
  body["lookback"] = lookback;
  body["patch_length"] = a.patch_length;
  body["d_patch"] = a.d_patch;
  body["points"] = std::move(points);
  body["exponents"] = std::move(exponents);
  write_json_report(json_path, man, body);
  std::printf("wrote %s and %s\n", csv_path.c_str(), json_path.c_str());
  return 0;
}

// ----------------------------------------------------------- gradcheck

struct GradcheckArgs {
  std::string arch = "all";
  int variables = 3, lookback = 8, patch_length = 4, d_patch = 4, layers = 1,
      horizon = 4;
  std::uint64_t seed = 7;
  double step = 1e-5, tol = 1e-4;
  std::string out_dir = ".";
};

int cmd_gradcheck(const GradcheckArgs& a) {
  RunManifest man;
  man.command = "gradcheck";
  man.started_at = iso8601_utc_now();
  std::uint64_t seed = a.seed;
  if (const char* env = std::getenv("DELTA_SEED"))
    seed = std::strtoull(env, nullptr, 10);
  man.seed = seed;

  std::vector<std::string> labels;
  if (a.arch == "all") {
    labels = {"delta",
              "delta/singleton",
              "delta/all_delegates",
              "variate_only",
              "full",
              "time_only",
              "delta_mlp_funnel",
              "delta_linear_funnel",
              "delta_mixed_funnel_in_attn",
              "delta_mixed_funnel_out_attn",
              "delta/learned_projections",
              "delta/revin_affine"};
  } else {
    labels = split_list(a.arch);
  }

  json results = json::array();
  double worst = 0.0;
  std::string worst_label;
  for (const auto& label : labels) {
    std::string base = label;
    std::string variant;
    std::size_t slash = label.find('/');
    if (slash != std::string::npos) {
      base = label.substr(0, slash);
      variant = label.substr(slash + 1);
    }
    ArchSpec spec = parse_arch(base);
    ModelConfig cfg;
    cfg.arch = spec.kind;
    cfg.funnel_in_op = spec.funnel_in_op;
    cfg.funnel_out_op = spec.funnel_out_op;
    cfg.variables = a.variables;
    cfg.lookback = a.lookback;
    cfg.horizon = a.horizon;
    cfg.patch_len = a.patch_length;
    cfg.d_patch = a.d_patch;
    cfg.layers = a.layers;
    cfg.seed = seed;
    if (variant == "singleton") cfg.funnel_out_mode = FunnelOutMode::singleton;
    else if (variant == "all_delegates")
      cfg.funnel_out_mode = FunnelOutMode::all_delegates;
    else if (variant == "learned_projections") cfg.learned_projections = true;
    else if (variant == "revin_affine") cfg.revin_affine = true;
    else if (!variant.empty())
      throw ConfigError("gradcheck: unknown variant '" + variant + "'");

    double err = gradcheck_model(cfg, seed + 17, a.step);
    std::printf("arch=%s max_rel_err=%.3e\n", label.c_str(), err);
    json r;
    r["arch"] = label;
    r["max_rel_err"] = err;
    results.push_back(std::move(r));
    if (err > worst) {
      worst = err;
      worst_label = label;
    }
  }
  std::printf("worst max_rel_err=%.3e (%s), tolerance %.1e\n", worst,
              worst_label.c_str(), a.tol);

  std::string report_path = a.out_dir + "/gradcheck_report.json";
  man.outputs = {report_path};
  man.finished_at = iso8601_utc_now();
  json body;
  body["results"] = std::move(results);
  body["worst"] = worst;
  body["worst_arch"] = worst_label;
  body["tolerance"] = a.tol;
  body["fd_step"] = a.step;
  write_json_report(report_path, man, body);
  return worst < a.tol ? 0 : 1;
}

int category_exit_code(const std::string& cat) {
  if (cat == "config") return 3;
  if (cat == "ingest") return 4;
  if (cat == "numeric") return 5;
  if (cat == "io") return 6;
  if (cat == "contract" || cat == "shape") return 7;
  if (cat == "resource") return 8;
  return 9;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"deltalab: delegate-token forecasting laboratory"};
  app.require_subcommand(1);

  TrainArgs train_args;
  auto* train_sub = app.add_subcommand("train", "fit a model on a CSV series");
  train_sub->add_option("--data", train_args.data, "CSV dataset path")
      ->required();
  train_sub->add_option("--config", train_args.config_file,
                        "key = value config file");
  train_sub->add_option("--out", train_args.out_dir, "output directory");
  add_config_flags(train_sub, train_args.over);

  EvalArgs eval_args;
  auto* eval_sub =
      app.add_subcommand("eval", "score a checkpoint on a CSV series");
  eval_sub->add_option("--data", eval_args.data, "CSV dataset path")
      ->required();
  eval_sub->add_option("--checkpoint", eval_args.checkpoint,
                       "checkpoint path")
      ->required();
  eval_sub->add_option("--out", eval_args.out_dir, "output directory");
  eval_sub->add_flag("--no-zscore", eval_args.no_zscore,
                     "skip train-split standardization");

  KeyRetArgs key_args;
  auto* key_sub = app.add_subcommand(
      "synth-keyretrieval", "attention-mass study on the synthetic key task");
  key_sub->add_option("--c-grid", key_args.c_grid,
                      "variable counts (list or start:end:xF)");
  key_sub->add_option("--keys", key_args.keys, "signal-bearing variables");
  key_sub->add_option("--length", key_args.length, "series length");
  key_sub->add_option("--window", key_args.lookback, "lookback window");
  key_sub->add_option("--horizon-steps", key_args.horizon, "forecast length");
  key_sub->add_option("--archs", key_args.archs, "architectures, comma list");
  key_sub->add_option("--seeds", key_args.seeds, "seed list");
  key_sub->add_option("--config", key_args.config_file, "config file");
  key_sub->add_option("--out", key_args.out_dir, "output directory");
  add_config_flags(key_sub, key_args.over);

  NoiseArgs noise_args;
  auto* noise_sub = app.add_subcommand(
      "noise-sweep", "error growth under structured corruption");
  noise_sub->add_option("--data", noise_args.data, "CSV dataset path")
      ->required();
  noise_sub->add_option("--levels", noise_args.levels, "proportions, comma list");
  noise_sub->add_option("--sigma", noise_args.sigma,
                        "noise scale in per-variable train stds");
  noise_sub->add_option("--archs", noise_args.archs, "architectures");
  noise_sub->add_option("--seeds", noise_args.seeds, "seed list");
  noise_sub->add_option("--config", noise_args.config_file, "config file");
  noise_sub->add_option("--out", noise_args.out_dir, "output directory");
  add_config_flags(noise_sub, noise_args.over);

  ProfileArgs profile_args;
  auto* profile_sub = app.add_subcommand(
      "profile", "peak-memory scaling across variable counts");
  profile_sub->add_option("--archs", profile_args.archs, "architectures");
  profile_sub->add_option("--c-grid", profile_args.c_grid,
                          "variable counts (list or start:end:xF)");
  profile_sub->add_option("--tokens", profile_args.tokens,
                          "delegate positions L/P");
  profile_sub->add_option("--patch-length", profile_args.patch_length,
                          "time steps per patch");
  profile_sub->add_option("--d-patch", profile_args.d_patch,
                          "patch embedding width");
  profile_sub->add_option("--full-max-c", profile_args.full_max_c,
                          "cap C for the full archetype (0 = none)");
  profile_sub->add_option("--out", profile_args.out_dir, "output directory");

  GradcheckArgs grad_args;
  auto* grad_sub = app.add_subcommand(
      "gradcheck", "tape gradients vs central finite differences");
  grad_sub->add_option("--arch", grad_args.arch,
                       "label, comma list, or 'all'");
  grad_sub->add_option("--variables", grad_args.variables, "variable count");
  grad_sub->add_option("--lookback", grad_args.lookback, "window length");
  grad_sub->add_option("--horizon", grad_args.horizon, "forecast length");
  grad_sub->add_option("--patch-length", grad_args.patch_length,
                       "time steps per patch");
  grad_sub->add_option("--d-patch", grad_args.d_patch, "embedding width");
  grad_sub->add_option("--layers", grad_args.layers, "encoder depth");
  grad_sub->add_option("--seed", grad_args.seed, "seed (DELTA_SEED env wins)");
  grad_sub->add_option("--fd-step", grad_args.step, "finite-difference step");
  grad_sub->add_option("--tol", grad_args.tol, "failure threshold");
  grad_sub->add_option("--out", grad_args.out_dir, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (train_sub->parsed()) return cmd_train(train_args);
    if (eval_sub->parsed()) return cmd_eval(eval_args);
    if (key_sub->parsed()) return cmd_keyretrieval(key_args);
    if (noise_sub->parsed()) return cmd_noise_sweep(noise_args);
    if (profile_sub->parsed()) return cmd_profile(profile_args);
    if (grad_sub->parsed()) return cmd_gradcheck(grad_args);
  } catch (const delta::Error& e) {
    std::fprintf(stderr, "error[%s]: %s\n", e.category().c_str(), e.what());
    return category_exit_code(e.category());
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error[internal]: %s\n", e.what());
    return 9;
  }
  return 0;
}
