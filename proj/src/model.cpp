#include "delta/model.hpp"

#include <cmath>
#include <functional>

#include "delta/baselines.hpp"

namespace delta {

const char* arch_name(ArchKind k) {
  switch (k) {
    case ArchKind::delta: return "delta";
    case ArchKind::variate_only: return "variate_only";
    case ArchKind::full: return "full";
    case ArchKind::time_only: return "time_only";
  }
  return "?";
}

const char* funnel_op_name(FunnelOp op) {
  switch (op) {
    case FunnelOp::attention: return "attention";
    case FunnelOp::mlp: return "mlp";
    case FunnelOp::linear: return "linear";
  }
  return "?";
}

const char* funnel_out_mode_name(FunnelOutMode m) {
  switch (m) {
    case FunnelOutMode::variable_gate: return "variable_gate";
    case FunnelOutMode::all_delegates: return "all_delegates";
    case FunnelOutMode::singleton: return "singleton";
  }
  return "?";
}

FunnelOp parse_funnel_op(const std::string& name) {
  if (name == "attention") return FunnelOp::attention;
  if (name == "mlp") return FunnelOp::mlp;
  if (name == "linear") return FunnelOp::linear;
  throw ConfigError("unknown funnel op '" + name +
                    "' (expected attention, mlp or linear)");
}

FunnelOutMode parse_funnel_out_mode(const std::string& name) {
  if (name == "variable_gate") return FunnelOutMode::variable_gate;
  if (name == "all_delegates") return FunnelOutMode::all_delegates;
  if (name == "singleton") return FunnelOutMode::singleton;
  throw ConfigError("unknown funnel-out mode '" + name +
                    "' (expected variable_gate, all_delegates or singleton)");
}

ArchSpec parse_arch(const std::string& name) {
  ArchSpec s;
  s.label = name;
  if (name == "delta") {
    s.kind = ArchKind::delta;
  } else if (name == "variate" || name == "variate_only") {
    s.kind = ArchKind::variate_only;
  } else if (name == "full") {
    s.kind = ArchKind::full;
  } else if (name == "time" || name == "time_only") {
    s.kind = ArchKind::time_only;
  } else if (name == "delta_mlp_funnel") {
    s.kind = ArchKind::delta;
    s.funnel_in_op = FunnelOp::mlp;
    s.funnel_out_op = FunnelOp::mlp;
  } else if (name == "delta_linear_funnel") {
    s.kind = ArchKind::delta;
    s.funnel_in_op = FunnelOp::linear;
    s.funnel_out_op = FunnelOp::linear;
  } else if (name == "delta_mixed_funnel_in_attn") {
    s.kind = ArchKind::delta;
    s.funnel_in_op = FunnelOp::attention;
    s.funnel_out_op = FunnelOp::mlp;
  } else if (name == "delta_mixed_funnel_out_attn") {
    s.kind = ArchKind::delta;
    s.funnel_in_op = FunnelOp::mlp;
    s.funnel_out_op = FunnelOp::attention;
  } else {
    throw ConfigError("unknown architecture '" + name + "'");
  }
  return s;
}

int ModelConfig::d_delegate() const {
  long long w = std::llround(expansion * d_patch);
  return static_cast<int>(w < 1 ? 1 : w);
}

std::vector<std::string> ModelConfig::validate() const {
  std::vector<std::string> bad;
  if (variables < 1) bad.push_back("variables");
  if (lookback < 1) bad.push_back("lookback");
  if (horizon < 1) bad.push_back("horizon");
  if (d_patch < 1) bad.push_back("d_patch");
  if (layers < 1) bad.push_back("layers");
  if (heads < 1) bad.push_back("heads");
  if (!(expansion >= 0.25)) bad.push_back("expansion");
  if (ln_eps <= 0.0) bad.push_back("ln_eps");
  if (revin_eps <= 0.0) bad.push_back("revin_eps");
  bool patched = arch == ArchKind::delta || arch == ArchKind::full;
  if (patched) {
    if (patch_len < 1 || (lookback >= 1 && lookback % patch_len != 0))
      bad.push_back("patch_len");
  }
  if (heads >= 1) {
    int width = arch == ArchKind::delta ? d_delegate() : d_patch;
    if (width % heads != 0) bad.push_back("heads");
  }
  return bad;
}

namespace {

Tensor init_weight(Rng& rng, int fan_in, int fan_out) {
  double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  return Tensor::uniform({fan_in, fan_out}, rng, -bound, bound, true);
}

struct Builder {
  Model& model;
  Rng& rng;

  void reg(const std::string& name, Tensor& slot, Tensor value) {
    slot = std::move(value);
    model.params.push_back({name, slot});
  }

  void linear_pair(const std::string& name, Tensor& w, Tensor& b, int in,
                   int out) {
    reg(name + ".w", w, init_weight(rng, in, out));
    reg(name + ".b", b, Tensor::zeros({out}, true));
  }

  void proj(const std::string& name, Tensor& w, int in, int out) {
    reg(name, w, init_weight(rng, in, out));
  }

  void block(const std::string& name, DeltaLayerParams::Block& blk,
             int width) {
    linear_pair(name + ".ff1", blk.w1, blk.b1, width, 2 * width);
    linear_pair(name + ".ff2", blk.w2, blk.b2, 2 * width, width);
    reg(name + ".ln.g", blk.ln_g, Tensor::full({width}, 1.0, true));
    reg(name + ".ln.b", blk.ln_b, Tensor::zeros({width}, true));
  }
};

Tensor residual_mlp_block(const Tensor& x, const DeltaLayerParams::Block& blk,
                          double eps) {
  Tensor h = linear(x, blk.w1, blk.b1);
  h = gelu(h);
  h = linear(h, blk.w2, blk.b2);
  return layer_norm(add(x, h), blk.ln_g, blk.ln_b, eps);
}

Tensor maybe_proj(const Tensor& x, const Tensor& w) {
  if (!w.defined()) return x;
  return linear(x, w, Tensor());
}

}  // namespace

Model init_model(const ModelConfig& cfg) {
  auto bad = cfg.validate();
  if (!bad.empty()) {
    std::string msg = "init_model: invalid configuration field(s):";
    for (const auto& f : bad) msg += " " + f;
    throw ConfigError(msg);
  }
  Model model;
  model.cfg = cfg;
  Rng rng(cfg.seed);
  Builder b{model, rng};

  int c = cfg.variables;
  int d = cfg.d_patch;
  int pn = cfg.patch_count();
  int dd = cfg.d_delegate();

  switch (cfg.arch) {
    case ArchKind::delta: {
      b.linear_pair("embed", model.embed_w, model.embed_b, cfg.patch_len, d);
      for (int li = 0; li < cfg.layers; ++li) {
        std::string base = "layer" + std::to_string(li);
        model.delta_layers.emplace_back();
        DeltaLayerParams& lp = model.delta_layers.back();
        b.linear_pair(base + ".precond1", lp.precond_w1, lp.precond_b1, d,
                      2 * d);
        b.linear_pair(base + ".precond2", lp.precond_w2, lp.precond_b2, 2 * d,
                      d);
        b.linear_pair(base + ".in_proj", lp.in_w, lp.in_b, d, dd);
        if (cfg.funnel_in_op == FunnelOp::attention) {
          b.reg(base + ".delegates", lp.delegates,
                Tensor::normal({pn, dd}, rng, 0.0, 0.02, true));
          if (cfg.learned_projections) {
            b.proj(base + ".fi.q", lp.fi_qw, dd, dd);
            b.proj(base + ".fi.k", lp.fi_kw, dd, dd);
            b.proj(base + ".fi.v", lp.fi_vw, dd, dd);
          }
        } else if (cfg.funnel_in_op == FunnelOp::mlp) {
          b.linear_pair(base + ".fin_mlp1", lp.fin_mlp_w1, lp.fin_mlp_b1, dd,
                        2 * dd);
          b.linear_pair(base + ".fin_mlp2", lp.fin_mlp_w2, lp.fin_mlp_b2,
                        2 * dd, dd);
        } else {
          b.linear_pair(base + ".fin_lin", lp.fin_lin_w, lp.fin_lin_b, dd, dd);
        }
        b.block(base + ".after_in", lp.after_in, dd);
        if (cfg.learned_projections) {
          b.proj(base + ".da.q", lp.da_qw, dd, dd);
          b.proj(base + ".da.k", lp.da_kw, dd, dd);
          b.proj(base + ".da.v", lp.da_vw, dd, dd);
        }
        b.block(base + ".after_delegate", lp.after_delegate, dd);
        if (cfg.funnel_out_op == FunnelOp::attention) {
          if (cfg.learned_projections) {
            if (cfg.funnel_out_mode != FunnelOutMode::singleton) {
              b.proj(base + ".fo.q", lp.fo_qw, dd, dd);
              b.proj(base + ".fo.k", lp.fo_kw, dd, dd);
            }
            b.proj(base + ".fo.v", lp.fo_vw, dd, dd);
          }
        } else if (cfg.funnel_out_op == FunnelOp::mlp) {
          b.linear_pair(base + ".fout_mlp1", lp.fout_mlp_w1, lp.fout_mlp_b1,
                        2 * dd, 2 * dd);
          b.linear_pair(base + ".fout_mlp2", lp.fout_mlp_w2, lp.fout_mlp_b2,
                        2 * dd, dd);
        } else {
          b.linear_pair(base + ".fout_lin", lp.fout_lin_w, lp.fout_lin_b,
                        2 * dd, dd);
        }
        b.block(base + ".after_out", lp.after_out, dd);
        b.linear_pair(base + ".out_proj", lp.out_w, lp.out_b, dd, d);
      }
      b.linear_pair("head", model.head_w, model.head_b, pn * d, cfg.horizon);
      break;
    }
    case ArchKind::full: {
      b.linear_pair("embed", model.embed_w, model.embed_b, cfg.patch_len, d);
      for (int li = 0; li < cfg.layers; ++li) {
        std::string base = "layer" + std::to_string(li);
        model.encoder_layers.emplace_back();
        EncoderLayerParams& lp = model.encoder_layers.back();
        b.proj(base + ".attn.q", lp.qw, d, d);
        b.proj(base + ".attn.k", lp.kw, d, d);
        b.proj(base + ".attn.v", lp.vw, d, d);
        b.reg(base + ".ln1.g", lp.ln1_g, Tensor::full({d}, 1.0, true));
        b.reg(base + ".ln1.b", lp.ln1_b, Tensor::zeros({d}, true));
        b.linear_pair(base + ".ff1", lp.ff_w1, lp.ff_b1, d, 2 * d);
        b.linear_pair(base + ".ff2", lp.ff_w2, lp.ff_b2, 2 * d, d);
        b.reg(base + ".ln2.g", lp.ln2_g, Tensor::full({d}, 1.0, true));
        b.reg(base + ".ln2.b", lp.ln2_b, Tensor::zeros({d}, true));
      }
      b.linear_pair("head", model.head_w, model.head_b, pn * d, cfg.horizon);
      break;
    }
    case ArchKind::variate_only: {
      b.linear_pair("embed", model.embed_w, model.embed_b, cfg.lookback, d);
      for (int li = 0; li < cfg.layers; ++li) {
        std::string base = "layer" + std::to_string(li);
        model.encoder_layers.emplace_back();
        EncoderLayerParams& lp = model.encoder_layers.back();
        b.proj(base + ".attn.q", lp.qw, d, d);
        b.proj(base + ".attn.k", lp.kw, d, d);
        b.proj(base + ".attn.v", lp.vw, d, d);
        b.reg(base + ".ln1.g", lp.ln1_g, Tensor::full({d}, 1.0, true));
        b.reg(base + ".ln1.b", lp.ln1_b, Tensor::zeros({d}, true));
        b.linear_pair(base + ".ff1", lp.ff_w1, lp.ff_b1, d, 2 * d);
        b.linear_pair(base + ".ff2", lp.ff_w2, lp.ff_b2, 2 * d, d);
        b.reg(base + ".ln2.g", lp.ln2_g, Tensor::full({d}, 1.0, true));
        b.reg(base + ".ln2.b", lp.ln2_b, Tensor::zeros({d}, true));
      }
      b.linear_pair("head", model.head_w, model.head_b, d, cfg.horizon);
      break;
    }
    case ArchKind::time_only: {
      b.linear_pair("embed", model.embed_w, model.embed_b, c, d);
      for (int li = 0; li < cfg.layers; ++li) {
        std::string base = "layer" + std::to_string(li);
        model.encoder_layers.emplace_back();
        EncoderLayerParams& lp = model.encoder_layers.back();
        b.proj(base + ".attn.q", lp.qw, d, d);
        b.proj(base + ".attn.k", lp.kw, d, d);
        b.proj(base + ".attn.v", lp.vw, d, d);
        b.reg(base + ".ln1.g", lp.ln1_g, Tensor::full({d}, 1.0, true));
        b.reg(base + ".ln1.b", lp.ln1_b, Tensor::zeros({d}, true));
        b.linear_pair(base + ".ff1", lp.ff_w1, lp.ff_b1, d, 2 * d);
        b.linear_pair(base + ".ff2", lp.ff_w2, lp.ff_b2, 2 * d, d);
        b.reg(base + ".ln2.g", lp.ln2_g, Tensor::full({d}, 1.0, true));
        b.reg(base + ".ln2.b", lp.ln2_b, Tensor::zeros({d}, true));
      }
      b.linear_pair("time_proj", model.time_proj_w, model.time_proj_b, d, c);
      b.linear_pair("head", model.head_w, model.head_b, cfg.lookback,
                    cfg.horizon);
      break;
    }
  }
  if (cfg.revin_affine) {
    b.reg("revin.g", model.revin_gamma, Tensor::full({c}, 1.0, true));
    b.reg("revin.b", model.revin_beta, Tensor::zeros({c}, true));
  }
  return model;
}

Tensor delta_layer_forward(const Model& model, const DeltaLayerParams& lp,
                           const Tensor& m, ForwardContext* ctx) {
  const ModelConfig& cfg = model.cfg;
  int bb = m.dim(0), c = m.dim(1), pn = m.dim(2);
  int dd = cfg.d_delegate();

  // per-token conditioning, no mixing across variables or positions
  Tensor t = linear(m, lp.precond_w1, lp.precond_b1);
  t = gelu(t);
  t = linear(t, lp.precond_w2, lp.precond_b2);

  Tensor mp = linear(t, lp.in_w, lp.in_b);  // [b, c, pn, dd]

  Tensor pooled_in;  // delegate stream before its residual block
  switch (cfg.funnel_in_op) {
    case FunnelOp::attention: {
      Tensor k = maybe_proj(mp, lp.fi_kw);
      Tensor v = maybe_proj(mp, lp.fi_vw);
      Tensor q = maybe_proj(lp.delegates, lp.fi_qw);
      pooled_in = funnel_in_attention(k, v, q, ctx);
      break;
    }
    case FunnelOp::mlp: {
      Tensor pooled = mean_axis(mp, 1);
      Tensor h = linear(pooled, lp.fin_mlp_w1, lp.fin_mlp_b1);
      h = gelu(h);
      pooled_in = linear(h, lp.fin_mlp_w2, lp.fin_mlp_b2);
      break;
    }
    case FunnelOp::linear: {
      Tensor pooled = mean_axis(mp, 1);
      pooled_in = linear(pooled, lp.fin_lin_w, lp.fin_lin_b);
      break;
    }
  }
  Tensor dprime = residual_mlp_block(pooled_in, lp.after_in, cfg.ln_eps);

  Tensor q2 = maybe_proj(dprime, lp.da_qw);
  Tensor k2 = maybe_proj(dprime, lp.da_kw);
  Tensor v2 = maybe_proj(dprime, lp.da_vw);
  Tensor mixed = attention(q2, k2, v2, cfg.heads, ctx, TraceStage::delegate);
  Tensor ddelta = residual_mlp_block(mixed, lp.after_delegate, cfg.ln_eps);

  Tensor mo;  // [b, c, pn, dd]
  switch (cfg.funnel_out_op) {
    case FunnelOp::attention: {
      switch (cfg.funnel_out_mode) {
        case FunnelOutMode::variable_gate: {
          Tensor q3 = maybe_proj(mp, lp.fo_qw);
          Tensor k3 = maybe_proj(ddelta, lp.fo_kw);
          Tensor v3 = maybe_proj(ddelta, lp.fo_vw);
          mo = funnel_out_gate(q3, k3, v3, ctx);
          break;
        }
        case FunnelOutMode::all_delegates: {
          Tensor q3 = reshape(maybe_proj(mp, lp.fo_qw), {bb, c * pn, dd});
          Tensor k3 = maybe_proj(ddelta, lp.fo_kw);
          Tensor v3 = maybe_proj(ddelta, lp.fo_vw);
          Tensor a = attention(q3, k3, v3, 1, ctx, TraceStage::funnel_out);
          mo = reshape(a, {bb, c, pn, dd});
          break;
        }
        case FunnelOutMode::singleton: {
          Tensor v3 = maybe_proj(ddelta, lp.fo_vw);
          mo = funnel_out_singleton(v3, c, ctx);
          break;
        }
      }
      break;
    }
    case FunnelOp::mlp: {
      Tensor cat = concat_last(mp, broadcast_axis(ddelta, 1, c));
      Tensor h = linear(cat, lp.fout_mlp_w1, lp.fout_mlp_b1);
      h = gelu(h);
      mo = linear(h, lp.fout_mlp_w2, lp.fout_mlp_b2);
      break;
    }
    case FunnelOp::linear: {
      Tensor cat = concat_last(mp, broadcast_axis(ddelta, 1, c));
      mo = linear(cat, lp.fout_lin_w, lp.fout_lin_b);
      break;
    }
  }
  Tensor mfinal = residual_mlp_block(mo, lp.after_out, cfg.ln_eps);
  Tensor out = linear(mfinal, lp.out_w, lp.out_b);  // [b, c, pn, d]
  if (cfg.outer_residual) out = add(out, m);
  return out;
}

Tensor Model::forecast(const Tensor& window, ForwardContext* ctx) const {
  if (!window.defined()) throw ContractError("forecast: undefined window");
  if (window.ndim() != 3)
    throw ShapeError("forecast: window must be [b, c, lookback], got " +
                     shape_str(window.shape()));
  if (window.dim(1) != cfg.variables || window.dim(2) != cfg.lookback)
    throw ShapeError("forecast: window " + shape_str(window.shape()) +
                     " does not match model built for " +
                     std::to_string(cfg.variables) + " variables, lookback " +
                     std::to_string(cfg.lookback));
  int bsz = window.dim(0);
  RevinStats stats;
  Tensor x = revin_normalize(window, stats, revin_gamma, revin_beta,
                             cfg.revin_eps);
  Tensor yn;
  switch (cfg.arch) {
    case ArchKind::delta: {
      Tensor grid = make_patches(x, cfg.patch_len);
      Tensor tok = embed_patches(grid, embed_w, embed_b);
      for (int li = 0; li < cfg.layers; ++li) {
        if (ctx) ctx->layer = li;
        tok = delta_layer_forward(*this, delta_layers[static_cast<std::size_t>(li)],
                                  tok, ctx);
      }
      Tensor flat = reshape(
          tok, {bsz, cfg.variables, cfg.patch_count() * cfg.d_patch});
      yn = linear(flat, head_w, head_b);
      break;
    }
    case ArchKind::full:
      yn = forecast_full(*this, x, ctx);
      break;
    case ArchKind::variate_only:
      yn = forecast_variate_only(*this, x, ctx);
      break;
    case ArchKind::time_only:
      yn = forecast_time_only(*this, x, ctx);
      break;
  }
  return revin_denormalize(yn, stats);
}

long long Model::param_count() const {
  long long n = 0;
  for (const auto& p : params) n += p.value.numel();
  return n;
}

std::uint64_t Model::param_checksum() const {
  std::uint64_t h = 1469598103934665603ULL;
  for (const auto& p : params) {
    h = fnv1a(p.name.data(), p.name.size(), h);
    h = fnv1a(p.value.data(),
              static_cast<std::size_t>(p.value.numel()) * sizeof(double), h);
  }
  return h;
}

std::vector<Tensor> Model::param_snapshot() const {
  std::vector<Tensor> snap;
  snap.reserve(params.size());
  for (const auto& p : params) snap.push_back(p.value.clone());
  return snap;
}

void Model::param_restore(const std::vector<Tensor>& snapshot) {
  if (snapshot.size() != params.size())
    throw ContractError("param_restore: snapshot has " +
                        std::to_string(snapshot.size()) + " tensors, model " +
                        std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (snapshot[i].shape() != params[i].value.shape())
      throw ContractError("param_restore: shape mismatch at " +
                          params[i].name);
    std::size_t n = static_cast<std::size_t>(snapshot[i].numel());
    const double* src = snapshot[i].data();
    double* dst = params[i].value.data();
    for (std::size_t j = 0; j < n; ++j) dst[j] = src[j];
  }
}

double gradcheck_model(const ModelConfig& cfg, std::uint64_t data_seed,
                       double h) {
  auto& tape = Tape::instance();
  tape.clear();
  Model model = init_model(cfg);
  Rng rng(data_seed);
  Tensor window =
      Tensor::uniform({1, cfg.variables, cfg.lookback}, rng, -1.0, 1.0);
  Tensor target =
      Tensor::uniform({1, cfg.variables, cfg.horizon}, rng, -1.0, 1.0);
  auto f = [&]() { return mse_loss(model.forecast(window), target); };
  double worst = 0.0;
  for (auto& p : model.params) {
    for (auto& q : model.params) q.value.zero_grad();
    double rel = finite_difference_check(f, p.value, h);
    if (rel > worst) worst = rel;
  }
  tape.clear();
  return worst;
}

}  // namespace delta
