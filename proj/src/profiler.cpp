#include "delta/profiler.hpp"

#include <cmath>
#include <new>

#include "delta/baselines.hpp"
#include "delta/kernels.hpp"

namespace delta {

long long analytic_attention_elements(ArchKind arch, int c, int lookback,
                                      int patch_len, FunnelOutMode mode) {
  if (c < 1 || lookback < 1 || patch_len < 1)
    throw ConfigError("analytic_attention_elements: dimensions must be positive");
  long long cc = c;
  long long ll = lookback;
  switch (arch) {
    case ArchKind::variate_only:
      return cc * cc;
    case ArchKind::time_only:
      return ll * ll;
    case ArchKind::full: {
      if (lookback % patch_len != 0)
        throw ConfigError("analytic_attention_elements: patch_len must divide lookback");
      long long n = ll / patch_len;
      return (cc * n) * (cc * n);
    }
    case ArchKind::delta: {
      if (lookback % patch_len != 0)
        throw ConfigError("analytic_attention_elements: patch_len must divide lookback");
      long long n = ll / patch_len;
      if (mode == FunnelOutMode::all_delegates)
        return cc * n + n * n + cc * n * n;
      return 2 * cc * n + n * n;
    }
  }
  throw ConfigError("analytic_attention_elements: unknown architecture");
}

long long measure_peak_memory(const ModelConfig& cfg_in, int batch) {
  if (batch < 1) throw ConfigError("measure_peak_memory: batch must be >= 1");
  ModelConfig cfg = cfg_in;
  cfg.layers = 1;
  Model model = init_model(cfg);

  auto& tape = Tape::instance();
  tape.clear();
  kern::Backend prev = kern::backend();
  kern::set_backend(kern::Backend::serial);

  Rng rng(cfg.seed + 1);
  Tensor x;
  int tokens = 0;
  switch (cfg.arch) {
    case ArchKind::delta:
      x = Tensor::uniform({batch, cfg.variables, cfg.patch_count(),
                           cfg.d_patch},
                          rng, -1.0, 1.0);
      break;
    case ArchKind::variate_only:
      tokens = cfg.variables;
      break;
    case ArchKind::full:
      tokens = cfg.variables * cfg.patch_count();
      break;
    case ArchKind::time_only:
      tokens = cfg.lookback;
      break;
  }
  if (cfg.arch != ArchKind::delta)
    x = Tensor::uniform({batch, tokens, cfg.d_patch}, rng, -1.0, 1.0);

  auto& counter = AllocationCounter::instance();
  long long live_before = counter.live_bytes();
  counter.reset_peak();
  try {
    Tensor y = cfg.arch == ArchKind::delta
                   ? delta_layer_forward(model, model.delta_layers[0], x,
                                         nullptr)
                   : encoder_block(x, model.encoder_layers[0], cfg.heads,
                                   cfg.ln_eps, nullptr);
    Tensor loss = mean_all(y);
    backward(loss);
  } catch (const std::bad_alloc&) {
    tape.clear();
    kern::set_backend(prev);
    throw ResourceError("measure_peak_memory: allocation failure at arch=" +
                        std::string(arch_name(cfg.arch)) +
                        " C=" + std::to_string(cfg.variables) +
                        " L=" + std::to_string(cfg.lookback) +
                        " P=" + std::to_string(cfg.patch_len) +
                        " batch=" + std::to_string(batch));
  }
  long long peak = counter.peak_bytes() - live_before;
  tape.clear();
  kern::set_backend(prev);
  return peak;
}

ExponentFit fit_scaling_exponent(
    const std::vector<std::array<double, 2>>& points) {
  if (points.size() < 3)
    throw ContractError("fit_scaling_exponent: need at least 3 points, got " +
                        std::to_string(points.size()));
  double sx = 0, sy = 0;
  for (const auto& p : points) {
    if (!(p[0] > 0.0) || !(p[1] > 0.0))
      throw ContractError("fit_scaling_exponent: points must be positive");
    sx += std::log(p[0]);
    sy += std::log(p[1]);
  }
  double n = static_cast<double>(points.size());
  double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0;
  for (const auto& p : points) {
    double dx = std::log(p[0]) - mx;
    double dy = std::log(p[1]) - my;
    sxx += dx * dx;
    sxy += dx * dy;
  }
  if (sxx == 0.0)
    throw ContractError("fit_scaling_exponent: all abscissae coincide");
  ExponentFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double rss = 0;
  for (const auto& p : points) {
    double r = std::log(p[1]) - (fit.intercept + fit.slope * std::log(p[0]));
    rss += r * r;
  }
  fit.residual = std::sqrt(rss / n);
  return fit;
}

std::vector<ComplexityReport> profile_scaling(ArchKind arch,
                                              const std::vector<int>& c_grid,
                                              int lookback, int patch_len,
                                              int d_patch,
                                              FunnelOutMode mode) {
  std::vector<ComplexityReport> rows;
  for (int c : c_grid) {
    ModelConfig cfg;
    cfg.arch = arch;
    cfg.variables = c;
    cfg.lookback = lookback;
    cfg.horizon = lookback;
    cfg.patch_len = patch_len;
    cfg.d_patch = d_patch;
    cfg.layers = 1;
    cfg.heads = 1;
    cfg.funnel_out_mode = mode;
    ComplexityReport r;
    r.arch = arch_name(arch);
    r.c = c;
    r.lookback = lookback;
    r.patch_len = patch_len;
    r.analytic_score_elements =
        analytic_attention_elements(arch, c, lookback, patch_len, mode);
    r.measured_peak_bytes = measure_peak_memory(cfg, 1);
    r.parameter_count = init_model(cfg).param_count();
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace delta
