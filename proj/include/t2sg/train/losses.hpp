#pragma once

#include <vector>

#include "t2sg/model/topoformer.hpp"
#include "t2sg/train/targets.hpp"

namespace t2sg::train {

using model::ForwardOutput;
using num::Tape;
using num::Value;

struct LossWeights {
  double lambda_cls = 1.5;
  double lambda_reg = 0.02;
  double focal_alpha = 0.25;
  double focal_gamma = 2.0;
};

// node detection loss: focal over class logits (all queries) plus L1 over
// normalized points (matched queries only)
inline Value node_loss(Tape& t, const ForwardOutput& out, const Targets& tg,
                       const LossWeights& w) {
  Value cls = t.sigmoid_focal_loss(out.cls_v, tg.cls, w.focal_alpha, w.focal_gamma);
  Value reg = t.masked_row_l1(out.reg_v, tg.reg, tg.reg_mask);
  return t.add(t.scale(cls, w.lambda_cls), t.scale(reg, w.lambda_reg));
}

// total indirect effect: factual scores minus the mean over counterfactual draws
inline Value tie(Tape& t, Value e_a, const std::vector<Value>& e_cf_samples) {
  if (e_cf_samples.empty()) throw ConfigError("tie: need at least one counterfactual sample");
  Value acc = e_cf_samples[0];
  for (std::size_t k = 1; k < e_cf_samples.size(); ++k) acc = t.add(acc, e_cf_samples[k]);
  if (e_cf_samples.size() > 1)
    acc = t.scale(acc, 1.0 / static_cast<double>(e_cf_samples.size()));
  return t.sub(e_a, acc);
}

inline Value tie(Tape& t, Value e_a, Value e_cf) { return tie(t, e_a, std::vector<Value>{e_cf}); }

// focal loss on edge scores already in probability space (TIE scores are
// clamped into [1e-6, 1-1e-6] by the op), masked and weighted by lambda_cls
inline Value edge_loss(Tape& t, Value edge_probs, const Targets& tg, const LossWeights& w) {
  Value focal =
      t.focal_prob_masked(edge_probs, tg.edge_target, tg.edge_mask, w.focal_alpha, w.focal_gamma);
  return t.scale(focal, w.lambda_cls);
}

inline Value total_loss(Tape& t, Value node, Value edge) { return t.add(node, edge); }

}  // namespace t2sg::train
