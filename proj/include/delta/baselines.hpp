#pragma once

#include "delta/model.hpp"

namespace delta {

// Post-norm transformer layer over a [b, tokens, width] sequence:
// x = ln(x + attn(x)), x = ln(x + ff(x)), with learned q/k/v maps.
Tensor encoder_block(const Tensor& x, const EncoderLayerParams& lp, int heads,
                     double eps, ForwardContext* ctx);

// Archetype forwards. Input is the normalized window [b, c, lookback];
// output is the normalized prediction [b, c, horizon].
Tensor forecast_variate_only(const Model& model, const Tensor& x,
                             ForwardContext* ctx);
Tensor forecast_full(const Model& model, const Tensor& x, ForwardContext* ctx);
Tensor forecast_time_only(const Model& model, const Tensor& x,
                          ForwardContext* ctx);

}  // namespace delta
