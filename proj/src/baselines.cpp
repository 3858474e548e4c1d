#include "delta/baselines.hpp"

namespace delta {

Tensor encoder_block(const Tensor& x, const EncoderLayerParams& lp, int heads,
                     double eps, ForwardContext* ctx) {
  Tensor q = linear(x, lp.qw, Tensor());
  Tensor k = linear(x, lp.kw, Tensor());
  Tensor v = linear(x, lp.vw, Tensor());
  Tensor a = attention(q, k, v, heads, ctx, TraceStage::self);
  Tensor h = layer_norm(add(x, a), lp.ln1_g, lp.ln1_b, eps);
  Tensor f = linear(h, lp.ff_w1, lp.ff_b1);
  f = gelu(f);
  f = linear(f, lp.ff_w2, lp.ff_b2);
  return layer_norm(add(h, f), lp.ln2_g, lp.ln2_b, eps);
}

Tensor forecast_variate_only(const Model& model, const Tensor& x,
                             ForwardContext* ctx) {
  // one token per variable: [b, c, lookback] -> [b, c, d]
  Tensor tok = linear(x, model.embed_w, model.embed_b);
  for (std::size_t li = 0; li < model.encoder_layers.size(); ++li) {
    if (ctx) ctx->layer = static_cast<int>(li);
    tok = encoder_block(tok, model.encoder_layers[li], model.cfg.heads,
                        model.cfg.ln_eps, ctx);
  }
  return linear(tok, model.head_w, model.head_b);
}

Tensor forecast_full(const Model& model, const Tensor& x, ForwardContext* ctx) {
  // one token per (variable, patch): [b, c*pn, d], variable-major order
  const ModelConfig& cfg = model.cfg;
  int b = x.dim(0);
  int pn = cfg.patch_count();
  Tensor grid = make_patches(x, cfg.patch_len);
  Tensor tok = embed_patches(grid, model.embed_w, model.embed_b);
  Tensor seq = reshape(tok, {b, cfg.variables * pn, cfg.d_patch});
  for (std::size_t li = 0; li < model.encoder_layers.size(); ++li) {
    if (ctx) ctx->layer = static_cast<int>(li);
    seq = encoder_block(seq, model.encoder_layers[li], cfg.heads, cfg.ln_eps,
                        ctx);
  }
  Tensor flat = reshape(seq, {b, cfg.variables, pn * cfg.d_patch});
  return linear(flat, model.head_w, model.head_b);
}

Tensor forecast_time_only(const Model& model, const Tensor& x,
                          ForwardContext* ctx) {
  // one token per time step: [b, lookback, c] -> [b, lookback, d]
  const ModelConfig& cfg = model.cfg;
  Tensor xt = transpose_12(x);
  Tensor tok = linear(xt, model.embed_w, model.embed_b);
  for (std::size_t li = 0; li < model.encoder_layers.size(); ++li) {
    if (ctx) ctx->layer = static_cast<int>(li);
    tok = encoder_block(tok, model.encoder_layers[li], cfg.heads, cfg.ln_eps,
                        ctx);
  }
  Tensor back = linear(tok, model.time_proj_w, model.time_proj_b);
  Tensor xb = transpose_12(back);  // [b, c, lookback]
  return linear(xb, model.head_w, model.head_b);
}

}  // namespace delta
