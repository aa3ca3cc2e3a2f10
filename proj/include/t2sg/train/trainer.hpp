#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "t2sg/errors.hpp"
#include "t2sg/gen/detections.hpp"
#include "t2sg/model/topoformer.hpp"
#include "t2sg/train/adamw.hpp"
#include "t2sg/train/losses.hpp"
#include "t2sg/train/targets.hpp"

namespace t2sg::train {

// Where the edge loss reads its scores from. kAuto resolves to kTie unless the
// model disables intervention, in which case the focal loss runs directly on
// E_A (the w/o-CIL ablation).
enum class EdgeSource { kAuto, kTie, kFactual };

inline const char* to_string(EdgeSource s) {
  switch (s) {
    case EdgeSource::kAuto: return "auto";
    case EdgeSource::kTie: return "tie";
    case EdgeSource::kFactual: return "factual";
  }
  return "auto";
}

inline EdgeSource edge_source_from_string(const std::string& s) {
  if (s == "auto") return EdgeSource::kAuto;
  if (s == "tie") return EdgeSource::kTie;
  if (s == "factual") return EdgeSource::kFactual;
  throw ConfigError("unknown edge_source: " + s);
}

struct TrainConfig {
  std::size_t epochs = 30;
  std::size_t batch_size = 4;
  std::size_t warmup_epochs = 2;  // node loss only before this epoch
  EdgeSource edge_source = EdgeSource::kAuto;
  OptimConfig optim;
  LossWeights weights;
  std::uint64_t shuffle_seed = 7;
  bool mask_bg_pairs = true;

  void check() const {
    if (epochs == 0 || batch_size == 0) throw ConfigError("train: epochs/batch_size must be >= 1");
  }
};

struct EpochLog {
  std::size_t epoch = 0;
  std::size_t step = 0;  // optimizer steps completed
  double l_v = 0.0;
  double l_e = 0.0;
  double lr = 0.0;
};

// A zero TIE signal (cil_mode=off) cannot train the edge head; that
// configuration must be explicit about using factual scores instead.
inline EdgeSource resolve_edge_source(const TrainConfig& cfg, const model::ModelConfig& mc) {
  if (cfg.edge_source == EdgeSource::kFactual) return EdgeSource::kFactual;
  if (cfg.edge_source == EdgeSource::kTie) {
    if (mc.cil_mode == model::CilMode::kOff)
      throw ConfigError(
          "edge_source=tie with cil_mode=off: TIE is identically zero; "
          "use edge_source=factual or enable a counterfactual policy");
    return EdgeSource::kTie;
  }
  return mc.cil_mode == model::CilMode::kOff ? EdgeSource::kFactual : EdgeSource::kTie;
}

inline std::size_t steps_per_epoch(std::size_t n, std::size_t batch) {
  return (n + batch - 1) / batch;
}

// Single-sample forward + loss; returns the loss node.
inline Value sample_loss(num::Tape& t, model::Model& m, const gen::DetectionSample& sample,
                         const Targets& tg, const TrainConfig& cfg, EdgeSource source,
                         bool with_edges, std::uint64_t forward_id, double* l_v_out = nullptr,
                         double* l_e_out = nullptr) {
  model::ForwardOutput out = model_forward(t, m, sample, forward_id, with_edges);
  Value lv = node_loss(t, out, tg, cfg.weights);
  if (l_v_out) *l_v_out = t.scalar(lv);
  if (!with_edges) {
    if (l_e_out) *l_e_out = 0.0;
    return lv;
  }
  Value probs;
  if (source == EdgeSource::kFactual) {
    probs = out.e_a_v;
  } else if (m.config.tie_mode == model::TieMode::kSigmoid) {
    Value raw_tie = train::tie(t, out.e_a_raw_v, out.e_cf_raw_vs);
    probs = t.sigmoid(raw_tie);
  } else {
    probs = train::tie(t, out.e_a_v, out.e_cf_vs);
  }
  Value le = edge_loss(t, probs, tg, cfg.weights);
  if (l_e_out) *l_e_out = t.scalar(le);
  return total_loss(t, lv, le);
}

// Deterministic training loop over precomputed targets; gradient accumulation
// across the batch, one optimizer step per batch. Aborts on non-finite loss
// naming the first bad tensor.
inline std::vector<EpochLog> train(model::Model& m,
                                   const std::vector<gen::DetectionSample>& data,
                                   const TrainConfig& cfg, AdamW& opt, std::size_t start_epoch = 0,
                                   const std::function<void(const EpochLog&)>& on_epoch = {}) {
  cfg.check();
  if (data.empty()) throw DataError("train: empty dataset");
  const EdgeSource source = resolve_edge_source(cfg, m.config);

  std::vector<Targets> targets;
  targets.reserve(data.size());
  for (const auto& s : data) targets.push_back(assign_targets(s, cfg.mask_bg_pairs));

  std::vector<EpochLog> log;
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    num::Rng shuffle_rng(num::derive_seed(cfg.shuffle_seed, epoch));
    std::shuffle(order.begin(), order.end(), shuffle_rng.engine());
    const bool with_edges = epoch >= cfg.warmup_epochs;

    double sum_lv = 0.0, sum_le = 0.0;
    std::size_t batch_fill = 0;
    for (std::size_t i = 0; i < order.size(); ++i) {
      const std::size_t idx = order[i];
      const std::uint64_t forward_id = epoch * data.size() + i;
      num::Tape t;
      double lv = 0.0, le = 0.0;
      Value loss = sample_loss(t, m, data[idx], targets[idx], cfg, source, with_edges, forward_id,
                               &lv, &le);
      if (!std::isfinite(t.scalar(loss))) {
        const std::string bad = t.first_nonfinite();
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch) + ", sample " +
                           std::to_string(idx) + "; first non-finite tensor: " +
                           (bad.empty() ? "loss" : bad));
      }
      t.backward(loss);
      sum_lv += lv;
      sum_le += le;
      if (++batch_fill == cfg.batch_size || i + 1 == order.size()) {
        opt.step(1.0 / static_cast<double>(batch_fill));
        batch_fill = 0;
      }
    }
    EpochLog el;
    el.epoch = epoch;
    el.step = opt.step_count();
    el.l_v = sum_lv / static_cast<double>(data.size());
    el.l_e = sum_le / static_cast<double>(data.size());
    el.lr = opt.current_lr();
    log.push_back(el);
    if (on_epoch) on_epoch(el);
  }
  return log;
}

// Convenience wrapper building the optimizer with a cosine horizon spanning
// the full run.
inline std::vector<EpochLog> train(model::Model& m,
                                   const std::vector<gen::DetectionSample>& data,
                                   TrainConfig cfg,
                                   const std::function<void(const EpochLog&)>& on_epoch = {}) {
  if (cfg.optim.total_steps == 0)
    cfg.optim.total_steps = cfg.epochs * steps_per_epoch(data.size(), cfg.batch_size);
  AdamW opt(m.parameters(), cfg.optim);
  return train(m, data, cfg, opt, 0, on_epoch);
}

}  // namespace t2sg::train
