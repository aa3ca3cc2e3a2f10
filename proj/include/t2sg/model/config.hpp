#pragma once

#include <cstddef>
#include <cstdint>
#include <string>

#include "t2sg/errors.hpp"
#include "t2sg/scene/types.hpp"

namespace t2sg::model {

// How the spatial proximity matrix enters the attention logits.
enum class SpmMode { kAdd, kMul, kHadamard, kOff };

// Counterfactual attention policy of the intervention layers.
enum class CilMode { kZero, kMean, kRandom, kOff };

// Residual/normalization layout of the encoder layers. kPostCombined is the
// single post-norm around the combined attention+FFN residual; kTwoSublayer
// is the conventional two-sublayer scheme, kept for ablation.
enum class NormScheme { kPostCombined, kTwoSublayer };

// How TIE scores map into probability space for the edge loss.
enum class TieMode { kClamp, kSigmoid };

inline const char* to_string(SpmMode m) {
  switch (m) {
    case SpmMode::kAdd: return "add";
    case SpmMode::kMul: return "mul";
    case SpmMode::kHadamard: return "hadamard";
    case SpmMode::kOff: return "off";
  }
  return "add";
}

inline SpmMode spm_mode_from_string(const std::string& s) {
  if (s == "add") return SpmMode::kAdd;
  if (s == "mul") return SpmMode::kMul;
  if (s == "hadamard") return SpmMode::kHadamard;
  if (s == "off") return SpmMode::kOff;
  throw ConfigError("unknown spm_mode: " + s);
}

inline const char* to_string(CilMode m) {
  switch (m) {
    case CilMode::kZero: return "zero";
    case CilMode::kMean: return "mean";
    case CilMode::kRandom: return "random";
    case CilMode::kOff: return "off";
  }
  return "zero";
}

inline CilMode cil_mode_from_string(const std::string& s) {
  if (s == "zero") return CilMode::kZero;
  if (s == "mean") return CilMode::kMean;
  if (s == "random") return CilMode::kRandom;
  if (s == "off") return CilMode::kOff;
  throw ConfigError("unknown cil_mode: " + s);
}

inline const char* to_string(NormScheme m) {
  return m == NormScheme::kPostCombined ? "post_combined" : "two_sublayer";
}

inline NormScheme norm_scheme_from_string(const std::string& s) {
  if (s == "post_combined") return NormScheme::kPostCombined;
  if (s == "two_sublayer") return NormScheme::kTwoSublayer;
  throw ConfigError("unknown norm_scheme: " + s);
}

inline const char* to_string(TieMode m) { return m == TieMode::kClamp ? "clamp" : "sigmoid"; }

inline TieMode tie_mode_from_string(const std::string& s) {
  if (s == "clamp") return TieMode::kClamp;
  if (s == "sigmoid") return TieMode::kSigmoid;
  throw ConfigError("unknown tie_mode: " + s);
}

struct ModelConfig {
  std::size_t d = 64;        // hidden width
  std::size_t n_blocks = 2;  // (LAL, CIL) pairs
  std::size_t n_queries = 24;
  std::size_t points_per_lane = 11;
  std::size_t d_in = 40;      // detector feature width
  std::size_t ffn_width = 0;  // 0 means 2*d
  SpmMode spm_mode = SpmMode::kAdd;
  CilMode cil_mode = CilMode::kZero;
  NormScheme norm_scheme = NormScheme::kPostCombined;
  TieMode tie_mode = TieMode::kClamp;
  std::size_t n_cf_samples = 1;  // counterfactual draws per step (random policy)
  double node_threshold = 0.3;
  double edge_threshold = 0.5;
  std::uint64_t init_seed = 1;
  scene::SpmConfig spm;

  std::size_t ffn_hidden() const { return ffn_width ? ffn_width : 2 * d; }
  std::size_t n_classes() const { return scene::kNumLaneCategories; }
  std::size_t reg_dim() const { return 3 * points_per_lane; }

  void check() const {
    if (d == 0 || n_blocks == 0 || n_queries == 0 || points_per_lane < 2 || d_in == 0)
      throw ConfigError("model config: d, n_blocks, N, l, d_in must be positive");
    if (n_cf_samples == 0) throw ConfigError("model config: n_cf_samples must be >= 1");
    if (node_threshold < 0.0 || node_threshold > 1.0)
      throw ConfigError("model config: node_threshold outside [0, 1]");
    if (edge_threshold <= 0.0 || edge_threshold > 1.0)
      throw ConfigError("model config: edge_threshold outside (0, 1]");
  }
};

}  // namespace t2sg::model
