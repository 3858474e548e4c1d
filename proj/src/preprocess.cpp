#include "delta/preprocess.hpp"

#include <cmath>

namespace delta {

Tensor make_patches(const Tensor& window, int patch_len) {
  if (!window.defined())
    throw ContractError("make_patches: undefined window");
  if (window.ndim() != 2 && window.ndim() != 3)
    throw ShapeError("make_patches: window must be [c, l] or [b, c, l], got " +
                     shape_str(window.shape()));
  int l = window.dim(-1);
  if (patch_len <= 0)
    throw ConfigError("make_patches: patch length must be positive, got " +
                      std::to_string(patch_len));
  if (l % patch_len != 0)
    throw ConfigError("make_patches: lookback " + std::to_string(l) +
                      " is not a multiple of patch length " +
                      std::to_string(patch_len));
  std::vector<int> out_shape = window.shape();
  out_shape.back() = l / patch_len;
  out_shape.push_back(patch_len);
  return reshape(window, out_shape);
}

Tensor revin_normalize(const Tensor& x, RevinStats& stats, const Tensor& gamma,
                       const Tensor& beta, double eps) {
  if (!x.defined()) throw ContractError("revin_normalize: undefined input");
  if (x.ndim() != 3)
    throw ShapeError("revin_normalize: input must be [b, c, l], got " +
                     shape_str(x.shape()));
  if (x.requires_grad())
    throw ContractError(
        "revin_normalize: input windows are data, not parameters");
  if (eps <= 0.0)
    throw ConfigError("revin_normalize: eps must be > 0");
  bool affine = gamma.defined() || beta.defined();
  int b = x.dim(0), c = x.dim(1), l = x.dim(2);
  if (affine) {
    if (!gamma.defined() || !beta.defined() || gamma.ndim() != 1 ||
        beta.ndim() != 1 || gamma.dim(0) != c || beta.dim(0) != c)
      throw ShapeError("revin_normalize: affine parameters must both be [" +
                       std::to_string(c) + "]");
  }

  stats.mu = Tensor::zeros({b, c});
  stats.sigma = Tensor::zeros({b, c});
  Tensor out = Tensor::zeros(x.shape());
  const double* src = x.data();
  double* mu = stats.mu.data();
  double* sig = stats.sigma.data();
  double* dst = out.data();
  for (int bi = 0; bi < b; ++bi) {
    for (int ci = 0; ci < c; ++ci) {
      std::size_t base = (static_cast<std::size_t>(bi) * c + ci) * l;
      double mean = 0.0;
      for (int t = 0; t < l; ++t) mean += src[base + t];
      mean /= l;
      double var = 0.0;
      for (int t = 0; t < l; ++t) {
        double d = src[base + t] - mean;
        var += d * d;
      }
      var /= l;
      double s = std::sqrt(var + eps);
      mu[static_cast<std::size_t>(bi) * c + ci] = mean;
      sig[static_cast<std::size_t>(bi) * c + ci] = s;
      double inv = 1.0 / s;
      for (int t = 0; t < l; ++t) dst[base + t] = (src[base + t] - mean) * inv;
    }
  }
  stats.valid = true;
  if (!affine) return out;

  // gamma * xhat + beta, per variable, differentiable through gamma/beta
  Tensor scaled = Tensor::zeros(x.shape());
  const double* xin = out.data();
  const double* g = gamma.data();
  const double* be = beta.data();
  double* sdst = scaled.data();
  for (int bi = 0; bi < b; ++bi)
    for (int ci = 0; ci < c; ++ci) {
      std::size_t base = (static_cast<std::size_t>(bi) * c + ci) * l;
      for (int t = 0; t < l; ++t)
        sdst[base + t] = g[ci] * xin[base + t] + be[ci];
    }
  if (grad_enabled() && (gamma.requires_grad() || beta.requires_grad())) {
    scaled.set_requires_grad(true);
    auto gn = gamma.node_, bn = beta.node_, on = scaled.node_;
    auto xhat = out.node_;  // keeps the normalized values alive
    Tape::instance().push(on, [gn, bn, on, xhat, b, c, l] {
      const double* gr = on->grad.data();
      const double* xh = xhat->data->data();
      for (int ci = 0; ci < c; ++ci) {
        double dg = 0.0, db = 0.0;
        for (int bi = 0; bi < b; ++bi) {
          std::size_t base = (static_cast<std::size_t>(bi) * c + ci) * l;
          for (int t = 0; t < l; ++t) {
            dg += gr[base + t] * xh[base + t];
            db += gr[base + t];
          }
        }
        if (gn->requires_grad) {
          if (gn->grad.empty())
            gn->grad = Buffer(static_cast<std::size_t>(gn->numel()), 0.0);
          gn->grad.data()[ci] += dg;
        }
        if (bn->requires_grad) {
          if (bn->grad.empty())
            bn->grad = Buffer(static_cast<std::size_t>(bn->numel()), 0.0);
          bn->grad.data()[ci] += db;
        }
      }
    });
  }
  return scaled;
}

Tensor revin_denormalize(const Tensor& yhat, const RevinStats& stats) {
  if (!yhat.defined())
    throw ContractError("revin_denormalize: undefined prediction");
  if (!stats.valid)
    throw ContractError(
        "revin_denormalize: statistics were never captured for this window");
  if (yhat.ndim() != 3)
    throw ShapeError("revin_denormalize: prediction must be [b, c, h], got " +
                     shape_str(yhat.shape()));
  int b = yhat.dim(0), c = yhat.dim(1), h = yhat.dim(2);
  if (stats.mu.dim(0) != b || stats.mu.dim(1) != c)
    throw ShapeError("revin_denormalize: statistics " +
                     shape_str(stats.mu.shape()) +
                     " do not match prediction " + shape_str(yhat.shape()));
  Tensor out = Tensor::zeros(yhat.shape());
  const double* src = yhat.data();
  const double* mu = stats.mu.data();
  const double* sig = stats.sigma.data();
  double* dst = out.data();
  for (int bi = 0; bi < b; ++bi)
    for (int ci = 0; ci < c; ++ci) {
      std::size_t base = (static_cast<std::size_t>(bi) * c + ci) * h;
      double m = mu[static_cast<std::size_t>(bi) * c + ci];
      double s = sig[static_cast<std::size_t>(bi) * c + ci];
      for (int t = 0; t < h; ++t) dst[base + t] = s * src[base + t] + m;
    }
  if (grad_enabled() && yhat.requires_grad()) {
    out.set_requires_grad(true);
    auto yn = yhat.node_, on = out.node_;
    auto sn = stats.sigma.node_;
    Tape::instance().push(on, [yn, on, sn, b, c, h] {
      const double* gr = on->grad.data();
      const double* sig2 = sn->data->data();
      if (yn->grad.empty())
        yn->grad = Buffer(static_cast<std::size_t>(yn->numel()), 0.0);
      double* dy = yn->grad.data();
      for (int bi = 0; bi < b; ++bi)
        for (int ci = 0; ci < c; ++ci) {
          std::size_t base = (static_cast<std::size_t>(bi) * c + ci) * h;
          double s = sig2[static_cast<std::size_t>(bi) * c + ci];
          for (int t = 0; t < h; ++t) dy[base + t] += s * gr[base + t];
        }
    });
  }
  return out;
}

Tensor embed_patches(const Tensor& grid, const Tensor& w, const Tensor& b) {
  return linear(grid, w, b);
}

SplitRanges split_by_ratio(int total, std::array<double, 3> ratios,
                           int lookback, int horizon) {
  if (total <= 0)
    throw ConfigError("split_by_ratio: dataset length must be positive");
  double sum = ratios[0] + ratios[1] + ratios[2];
  if (!(sum > 0.0) || ratios[0] < 0 || ratios[1] < 0 || ratios[2] < 0)
    throw ConfigError("split_by_ratio: ratios must be non-negative with a "
                      "positive sum");
  double r0 = ratios[0] / sum, r1 = ratios[1] / sum;
  // nudge against representation error: 10000 * (0.7 + 0.1) is 7999.999...
  int b1 = static_cast<int>(std::floor(total * r0 + 1e-9));
  int b2 = static_cast<int>(std::floor(total * (r0 + r1) + 1e-9));
  SplitRanges s;
  s.train = {0, b1};
  s.val = {b1, b2};
  s.test = {b2, total};
  int need = lookback + horizon;
  auto check = [&](const SplitRanges::Range& r, const char* name) {
    if (r.length() == 0) {
      s.warnings.push_back(std::string("empty ") + name + " split");
      return;
    }
    if (r.length() < need)
      throw ConfigError(std::string("split_by_ratio: ") + name + " split of " +
                        std::to_string(r.length()) +
                        " steps cannot hold one lookback+horizon window of " +
                        std::to_string(need));
  };
  check(s.train, "train");
  check(s.val, "val");
  check(s.test, "test");
  return s;
}

std::vector<int> window_starts(const SplitRanges::Range& range, int lookback,
                               int horizon) {
  std::vector<int> starts;
  int last = range.end - (lookback + horizon);
  for (int s = range.begin; s <= last; ++s) starts.push_back(s);
  return starts;
}

}  // namespace delta
