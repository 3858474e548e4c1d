#pragma once

#include <string>
#include <vector>

namespace delta {

enum class TraceStage { funnel_in, delegate, funnel_out, self };

inline const char* stage_name(TraceStage s) {
  switch (s) {
    case TraceStage::funnel_in: return "funnel_in";
    case TraceStage::delegate: return "delegate";
    case TraceStage::funnel_out: return "funnel_out";
    case TraceStage::self: return "self";
  }
  return "?";
}

struct TraceEntry {
  int layer = 0;
  TraceStage stage = TraceStage::self;
  int batch = 0;
  int head = 0;
  int position = 0;  // query index within the stage
  std::vector<double> weights;
};

// Row-level record of every softmax the model computed during a forward
// pass. Populated only when enabled; weights are copied post-normalization.
struct AttentionTrace {
  bool enabled = false;
  std::vector<TraceEntry> entries;

  void clear() { entries.clear(); }
};

// Per-forward instrumentation threaded through the model. score_elements
// counts every attention logit/weight the pass produced.
struct ForwardContext {
  AttentionTrace* trace = nullptr;
  unsigned long long score_elements = 0;
  int layer = 0;
};

}  // namespace delta
