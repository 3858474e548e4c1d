#pragma once

#include <string>
#include <vector>

#include "delta/ops.hpp"
#include "delta/preprocess.hpp"
#include "delta/tensor.hpp"
#include "delta/trace.hpp"

namespace delta {

// Forecaster families sharing preprocessing, decoder shape, loss and
// optimizer. delta routes cross-variable mixing through per-position
// delegate tokens; the others attend directly over variable tokens,
// all patch tokens, or time steps.
enum class ArchKind { delta, variate_only, full, time_only };

// What performs the funnel-in / funnel-out exchange in a delta layer.
enum class FunnelOp { attention, mlp, linear };

// How delegate content returns to the variable rows.
//   variable_gate: softmax over variables yields one scalar gate per row
//   all_delegates: every patch row attends over all delegate rows
//   singleton:     degenerate one-key softmax, weight exactly 1
enum class FunnelOutMode { variable_gate, all_delegates, singleton };

const char* arch_name(ArchKind k);
const char* funnel_op_name(FunnelOp op);
const char* funnel_out_mode_name(FunnelOutMode m);

FunnelOp parse_funnel_op(const std::string& name);
FunnelOutMode parse_funnel_out_mode(const std::string& name);

// Parses an architecture label. Accepts the four family names plus the
// named delta variants (delta_mlp_funnel, delta_linear_funnel,
// delta_mixed_funnel_in_attn, delta_mixed_funnel_out_attn).
struct ArchSpec {
  ArchKind kind = ArchKind::delta;
  FunnelOp funnel_in_op = FunnelOp::attention;
  FunnelOp funnel_out_op = FunnelOp::attention;
  std::string label;
};
ArchSpec parse_arch(const std::string& name);

struct ModelConfig {
  ArchKind arch = ArchKind::delta;
  int variables = 0;  // c; fixed at init time
  int lookback = 96;
  int horizon = 96;
  int patch_len = 16;
  int d_patch = 16;  // token width after patch embedding
  int layers = 2;
  int heads = 1;
  double expansion = 1.5;  // delegate width multiplier over d_patch
  FunnelOutMode funnel_out_mode = FunnelOutMode::variable_gate;
  FunnelOp funnel_in_op = FunnelOp::attention;
  FunnelOp funnel_out_op = FunnelOp::attention;
  bool learned_projections = false;  // extra q/k/v maps in the delta stages
  bool outer_residual = false;       // add the layer input to its output
  bool revin_affine = false;
  double ln_eps = 1e-5;
  double revin_eps = 1e-5;
  std::uint64_t seed = 42;

  int patch_count() const { return lookback / patch_len; }
  int d_delegate() const;  // max(1, round(expansion * d_patch))

  // Field names that fail validation; empty means the config is usable.
  std::vector<std::string> validate() const;
};

struct Param {
  std::string name;
  Tensor value;
};

// One delta layer: per-token conditioning, width projections, the three
// attention stages with their residual-MLP blocks, and optional extras.
struct DeltaLayerParams {
  Tensor precond_w1, precond_b1, precond_w2, precond_b2;  // d -> 2d -> d
  Tensor in_w, in_b;                                      // d -> d'
  Tensor delegates;                                       // [pn, d']
  // residual-MLP block after each stage: d' -> 2d' -> d', then layer norm
  struct Block {
    Tensor w1, b1, w2, b2, ln_g, ln_b;
  };
  Block after_in, after_delegate, after_out;
  Tensor out_w, out_b;  // d' -> d
  // learned projections (optional): one q/k/v triple per attention stage
  Tensor fi_qw, fi_kw, fi_vw;
  Tensor da_qw, da_kw, da_vw;
  Tensor fo_qw, fo_kw, fo_vw;
  // funnel replacements (mlp / linear operated variants)
  Tensor fin_mlp_w1, fin_mlp_b1, fin_mlp_w2, fin_mlp_b2;  // d' -> 2d' -> d'
  Tensor fin_lin_w, fin_lin_b;                            // d' -> d'
  Tensor fout_mlp_w1, fout_mlp_b1, fout_mlp_w2, fout_mlp_b2;  // 2d'->2d'->d'
  Tensor fout_lin_w, fout_lin_b;                              // 2d' -> d'
};

// One token-transformer layer used by the archetype baselines:
// learned q/k/v self-attention and a feed-forward, post-norm residuals.
struct EncoderLayerParams {
  Tensor qw, kw, vw;
  Tensor ln1_g, ln1_b;
  Tensor ff_w1, ff_b1, ff_w2, ff_b2;
  Tensor ln2_g, ln2_b;
};

class Model {
 public:
  ModelConfig cfg;
  Tensor embed_w, embed_b;  // patch/window/step embedding, arch-dependent
  Tensor head_w, head_b;    // decoder to the horizon
  Tensor time_proj_w, time_proj_b;  // time_only: token width -> variables
  Tensor revin_gamma, revin_beta;   // defined only when revin_affine
  std::vector<DeltaLayerParams> delta_layers;
  std::vector<EncoderLayerParams> encoder_layers;

  // Registration order is fixed; checkpoints and the optimizer rely on it.
  std::vector<Param> params;

  // window: [b, c, lookback], raw scale -> [b, c, horizon], raw scale.
  Tensor forecast(const Tensor& window, ForwardContext* ctx = nullptr) const;

  long long param_count() const;
  std::uint64_t param_checksum() const;
  std::vector<Tensor> param_snapshot() const;
  void param_restore(const std::vector<Tensor>& snapshot);
};

Model init_model(const ModelConfig& cfg);

// Single delta layer application; exposed for tests and instrumentation.
// m: [b, c, pn, d_patch] -> same shape.
Tensor delta_layer_forward(const Model& model, const DeltaLayerParams& lp,
                           const Tensor& m, ForwardContext* ctx);

// Max relative error between tape gradients and central finite differences
// over every parameter of a model built from cfg, loss = forecast MSE
// against a fixed random target.
double gradcheck_model(const ModelConfig& cfg, std::uint64_t data_seed,
                       double h);

}  // namespace delta
