#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "t2sg/gen/detections.hpp"
#include "t2sg/model/config.hpp"
#include "t2sg/numeric/grad_check.hpp"
#include "t2sg/numeric/tape.hpp"
#include "t2sg/scene/graph_ops.hpp"

namespace t2sg::model {

using num::Dense;
using num::Matrix;
using num::Parameter;
using num::Tape;
using num::Value;

// Encoder layer parameters. LAL and CIL share this shape; CIL instances
// additionally carry the counterfactual policy chosen in the config. Both
// norm parameter sets are always allocated so checkpoints are layout-stable
// across norm schemes.
struct AttnLayer {
  Parameter wq, wk, wv;  // d x d
  Dense ffn1, ffn2;
  Parameter norm_gain, norm_bias;
  Parameter norm2_gain, norm2_bias;
};

struct EdgeHead {
  Dense s1, s2, s3;  // MLP_s: d -> d -> d -> d
  Dense e1, e2, e3;  // MLP_e
  Dense g1, g2, g3;  // MLP_edge: 2d -> d -> d/2 -> 1
};

struct LaneHead {
  Dense cls1, cls2;  // d -> d -> |C_lc|
  Dense reg1, reg2;  // d -> d -> 3l
};

struct GsaResult {
  Value out;
  Value attn;  // post-softmax attention
};

namespace detail {

inline Value combine_spm(Tape& t, Value logits, const Matrix& a_spm, SpmMode mode) {
  switch (mode) {
    case SpmMode::kAdd: return t.add(logits, t.constant(a_spm, "a_spm"));
    case SpmMode::kMul: return t.matmul(logits, t.constant(a_spm, "a_spm"));
    case SpmMode::kHadamard: return t.hadamard(logits, t.constant(a_spm, "a_spm"));
    case SpmMode::kOff: return logits;
  }
  return logits;
}

inline Matrix combine_spm_value(const Matrix& logits, const Matrix& a_spm, SpmMode mode) {
  switch (mode) {
    case SpmMode::kAdd: return num::add(logits, a_spm);
    case SpmMode::kMul: return num::matmul(logits, a_spm);
    case SpmMode::kHadamard: return num::hadamard(logits, a_spm);
    case SpmMode::kOff: return logits;
  }
  return logits;
}

inline Value ffn_forward(Tape& t, AttnLayer& layer, Value x) {
  Value h = t.relu(t.add_row(t.matmul(x, t.leaf(layer.ffn1.w)), t.leaf(layer.ffn1.b)));
  return t.add_row(t.matmul(h, t.leaf(layer.ffn2.w)), t.leaf(layer.ffn2.b));
}

// residual + FFN + norm around an attention output, per the configured scheme
inline Value encoder_wrap(Tape& t, AttnLayer& layer, Value x, Value attn_out, NormScheme scheme) {
  if (scheme == NormScheme::kPostCombined)
    return t.layer_norm(t.add(x, ffn_forward(t, layer, attn_out)), t.leaf(layer.norm_gain),
                        t.leaf(layer.norm_bias));
  Value a = t.layer_norm(t.add(x, attn_out), t.leaf(layer.norm_gain), t.leaf(layer.norm_bias));
  return t.layer_norm(t.add(a, ffn_forward(t, layer, a)), t.leaf(layer.norm2_gain),
                      t.leaf(layer.norm2_bias));
}

}  // namespace detail

// Geometry-guided self-attention: scaled dot-product logits combined with the
// spatial proximity matrix, row-softmaxed, applied to the value projection.
inline GsaResult gsa_forward(Tape& t, AttnLayer& layer, Value x, const Matrix& a_spm,
                             SpmMode mode) {
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(t.value(x).cols()));
  Value q = t.matmul(x, t.leaf(layer.wq));
  Value k = t.matmul(x, t.leaf(layer.wk));
  Value logits = t.scale(t.matmul_nt(q, k), inv_sqrt_d);
  Value attn = t.row_softmax(detail::combine_spm(t, logits, a_spm, mode));
  Value out = t.matmul(attn, t.matmul(x, t.leaf(layer.wv)));
  return {out, attn};
}

inline Value lal_forward(Tape& t, AttnLayer& layer, Value x, const Matrix& a_spm, SpmMode mode,
                         NormScheme scheme, Value* attn_out = nullptr) {
  GsaResult g = gsa_forward(t, layer, x, a_spm, mode);
  if (attn_out) *attn_out = g.attn;
  return detail::encoder_wrap(t, layer, x, g.out, scheme);
}

// Counterfactual self-attention: the learned logits are replaced by the
// policy's hypothetical matrix (an intervention, so it carries no gradient),
// then combined with A_SPM and softmaxed as usual. Only the value path of x
// remains differentiable.
inline GsaResult csa_forward(Tape& t, AttnLayer& layer, Value x, const Matrix& a_spm, SpmMode mode,
                             CilMode policy, num::Rng& rng) {
  const Matrix& xv = t.value(x);
  const std::size_t n = xv.rows();
  Matrix abar(n, n);
  if (policy != CilMode::kZero) {
    const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(xv.cols()));
    const Matrix logits = num::scale(
        num::matmul_nt(num::matmul(xv, layer.wq.value), num::matmul(xv, layer.wk.value)),
        inv_sqrt_d);
    const double mu = num::mean_all(logits);
    if (policy == CilMode::kMean) {
      abar = Matrix(n, n, mu);
    } else {
      double var = 0.0;
      for (std::size_t i = 0; i < logits.size(); ++i) {
        const double d = logits.data()[i] - mu;
        var += d * d;
      }
      var /= static_cast<double>(logits.size());
      abar = rng.gaussian_matrix(n, n, mu, std::sqrt(var));
    }
  }
  const Matrix attn_value = num::row_softmax_value(detail::combine_spm_value(abar, a_spm, mode));
  Value attn = t.constant(attn_value, "csa_attn");
  Value out = t.matmul(attn, t.matmul(x, t.leaf(layer.wv)));
  return {out, attn};
}

inline Value cil_forward_cf(Tape& t, AttnLayer& layer, Value x, const Matrix& a_spm, SpmMode mode,
                            NormScheme scheme, CilMode policy, num::Rng& rng,
                            Value* attn_out = nullptr) {
  GsaResult g = csa_forward(t, layer, x, a_spm, mode, policy, rng);
  if (attn_out) *attn_out = g.attn;
  return detail::encoder_wrap(t, layer, x, g.out, scheme);
}

struct EdgeScores {
  Value prob;  // N x N sigmoid scores, diagonal zeroed
  Value raw;   // N x N pre-sigmoid logits
};

// Pairwise scorer: independent start/end MLPs, concat per ordered pair, a
// final MLP to one logit, sigmoid, diagonal forced to zero.
inline EdgeScores edge_head_forward(Tape& t, EdgeHead& head, Value x_tilde) {
  const std::size_t n = t.value(x_tilde).rows();
  std::vector<Dense*> mlp_s{&head.s1, &head.s2, &head.s3};
  std::vector<Dense*> mlp_e{&head.e1, &head.e2, &head.e3};
  std::vector<Dense*> mlp_edge{&head.g1, &head.g2, &head.g3};
  Value xs = num::mlp_forward(t, x_tilde, mlp_s);
  Value xe = num::mlp_forward(t, x_tilde, mlp_e);
  Value pairs = t.pair_concat(xs, xe);
  Value raw = t.reshape(num::mlp_forward(t, pairs, mlp_edge), n, n);
  Value prob = t.zero_diagonal(t.sigmoid(raw));
  return {prob, raw};
}

struct ForwardOutput {
  // tape handles (valid while the tape that produced them lives)
  Value x_tilde_v, e_a_v, e_a_raw_v, cls_v, reg_v;
  std::vector<Value> e_cf_vs, e_cf_raw_vs;  // one per counterfactual draw
  // extracted values
  Matrix x_tilde, e_a, e_cf, cls_logits, reg_points;
  std::vector<Matrix> attn_factual, attn_cf;  // post-softmax, per layer (first draw)
  bool has_edges = false;

  Value e_cf_v() const { return e_cf_vs.front(); }
};

struct Model {
  ModelConfig config;
  Dense input_proj;
  std::vector<AttnLayer> lal, cil;
  EdgeHead edge_head;
  LaneHead lane_head;

  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> out;
    auto dense = [&out](Dense& d) {
      out.push_back(&d.w);
      out.push_back(&d.b);
    };
    dense(input_proj);
    auto attn = [&](AttnLayer& l) {
      out.push_back(&l.wq);
      out.push_back(&l.wk);
      out.push_back(&l.wv);
      dense(l.ffn1);
      dense(l.ffn2);
      out.push_back(&l.norm_gain);
      out.push_back(&l.norm_bias);
      out.push_back(&l.norm2_gain);
      out.push_back(&l.norm2_bias);
    };
    for (auto& l : lal) attn(l);
    for (auto& l : cil) attn(l);
    dense(edge_head.s1);
    dense(edge_head.s2);
    dense(edge_head.s3);
    dense(edge_head.e1);
    dense(edge_head.e2);
    dense(edge_head.e3);
    dense(edge_head.g1);
    dense(edge_head.g2);
    dense(edge_head.g3);
    dense(lane_head.cls1);
    dense(lane_head.cls2);
    dense(lane_head.reg1);
    dense(lane_head.reg2);
    return out;
  }
};

namespace detail {

inline Parameter square_weight(num::Rng& rng, std::size_t d, const std::string& name) {
  const double s = std::sqrt(6.0 / static_cast<double>(2 * d));
  return Parameter(name, rng.uniform_matrix(d, d, -s, s));
}

inline AttnLayer make_attn_layer(num::Rng& rng, const ModelConfig& c, const std::string& prefix) {
  AttnLayer l;
  l.wq = square_weight(rng, c.d, prefix + ".wq");
  l.wk = square_weight(rng, c.d, prefix + ".wk");
  l.wv = square_weight(rng, c.d, prefix + ".wv");
  l.ffn1 = num::make_dense(rng, c.d, c.ffn_hidden(), prefix + ".ffn1");
  l.ffn2 = num::make_dense(rng, c.ffn_hidden(), c.d, prefix + ".ffn2");
  l.norm_gain = Parameter(prefix + ".norm.gain", Matrix(1, c.d, 1.0));
  l.norm_bias = Parameter(prefix + ".norm.bias", Matrix(1, c.d));
  l.norm2_gain = Parameter(prefix + ".norm2.gain", Matrix(1, c.d, 1.0));
  l.norm2_bias = Parameter(prefix + ".norm2.bias", Matrix(1, c.d));
  return l;
}

}  // namespace detail

inline Model make_model(const ModelConfig& config) {
  config.check();
  num::Rng rng(num::derive_seed(config.init_seed, 0x70b0));
  Model m;
  m.config = config;
  const std::size_t d = config.d;
  m.input_proj = num::make_dense(rng, config.d_in, d, "input_proj");
  for (std::size_t i = 0; i < config.n_blocks; ++i) {
    m.lal.push_back(detail::make_attn_layer(rng, config, "lal" + std::to_string(i)));
    m.cil.push_back(detail::make_attn_layer(rng, config, "cil" + std::to_string(i)));
  }
  m.edge_head.s1 = num::make_dense(rng, d, d, "edge.s1");
  m.edge_head.s2 = num::make_dense(rng, d, d, "edge.s2");
  m.edge_head.s3 = num::make_dense(rng, d, d, "edge.s3");
  m.edge_head.e1 = num::make_dense(rng, d, d, "edge.e1");
  m.edge_head.e2 = num::make_dense(rng, d, d, "edge.e2");
  m.edge_head.e3 = num::make_dense(rng, d, d, "edge.e3");
  m.edge_head.g1 = num::make_dense(rng, 2 * d, d, "edge.g1");
  m.edge_head.g2 = num::make_dense(rng, d, std::max<std::size_t>(d / 2, 1), "edge.g2");
  m.edge_head.g3 = num::make_dense(rng, std::max<std::size_t>(d / 2, 1), 1, "edge.g3");
  m.lane_head.cls1 = num::make_dense(rng, d, d, "lane.cls1");
  m.lane_head.cls2 = num::make_dense(rng, d, config.n_classes(), "lane.cls2");
  m.lane_head.reg1 = num::make_dense(rng, d, d, "lane.reg1");
  m.lane_head.reg2 = num::make_dense(rng, d, config.reg_dim(), "lane.reg2");
  return m;
}

// Full forward pass. The factual branch runs every CIL as a plain
// geometry-guided layer with its own weights; the counterfactual branch shares
// all weights and the input but applies the intervention policy at each CIL.
// `step` seeds the random policy so a training step is reproducible.
inline ForwardOutput model_forward(Tape& t, Model& m, const gen::DetectionSample& sample,
                                   std::uint64_t step = 0, bool need_edges = true) {
  const ModelConfig& c = m.config;
  if (sample.queries.cols() != c.d_in)
    throw num::dim_error("model_forward: sample feature width " +
                         std::to_string(sample.queries.cols()) + " != d_in " +
                         std::to_string(c.d_in));
  const Matrix a_spm = scene::spm(sample.pred_centerlines, c.spm);

  ForwardOutput out;
  Value x0 = t.add_row(t.matmul(t.constant(sample.queries, "queries"), t.leaf(m.input_proj.w)),
                       t.leaf(m.input_proj.b));

  Value x = x0;
  for (std::size_t i = 0; i < c.n_blocks; ++i) {
    Value attn;
    x = lal_forward(t, m.lal[i], x, a_spm, c.spm_mode, c.norm_scheme, &attn);
    out.attn_factual.push_back(t.value(attn));
    x = lal_forward(t, m.cil[i], x, a_spm, c.spm_mode, c.norm_scheme, &attn);
    out.attn_factual.push_back(t.value(attn));
  }
  out.x_tilde_v = x;
  out.x_tilde = t.value(x);

  std::vector<Dense*> cls_mlp{&m.lane_head.cls1, &m.lane_head.cls2};
  std::vector<Dense*> reg_mlp{&m.lane_head.reg1, &m.lane_head.reg2};
  out.cls_v = num::mlp_forward(t, x, cls_mlp);
  out.reg_v = num::mlp_forward(t, x, reg_mlp);
  out.cls_logits = t.value(out.cls_v);
  out.reg_points = t.value(out.reg_v);

  if (!need_edges) return out;
  out.has_edges = true;

  EdgeScores ea = edge_head_forward(t, m.edge_head, x);
  out.e_a_v = ea.prob;
  out.e_a_raw_v = ea.raw;
  out.e_a = t.value(ea.prob);

  if (c.cil_mode == CilMode::kOff) {
    // no intervention: both branches are the same computation
    out.e_cf_vs.push_back(ea.prob);
    out.e_cf_raw_vs.push_back(ea.raw);
    out.e_cf = out.e_a;
    out.attn_cf = out.attn_factual;
    return out;
  }

  // zero/mean policies are point masses; only the random policy needs draws
  const std::size_t draws = c.cil_mode == CilMode::kRandom ? c.n_cf_samples : 1;
  num::Rng policy_rng(num::derive_seed(c.init_seed ^ 0xcf5a17ULL, step));
  for (std::size_t s = 0; s < draws; ++s) {
    Value xc = x0;
    for (std::size_t i = 0; i < c.n_blocks; ++i) {
      Value attn;
      xc = lal_forward(t, m.lal[i], xc, a_spm, c.spm_mode, c.norm_scheme, &attn);
      if (s == 0) out.attn_cf.push_back(t.value(attn));
      xc = cil_forward_cf(t, m.cil[i], xc, a_spm, c.spm_mode, c.norm_scheme, c.cil_mode,
                          policy_rng, &attn);
      if (s == 0) out.attn_cf.push_back(t.value(attn));
    }
    EdgeScores ecf = edge_head_forward(t, m.edge_head, xc);
    out.e_cf_vs.push_back(ecf.prob);
    out.e_cf_raw_vs.push_back(ecf.raw);
  }
  Matrix cf_mean = t.value(out.e_cf_vs[0]);
  for (std::size_t s = 1; s < out.e_cf_vs.size(); ++s)
    cf_mean = num::add(cf_mean, t.value(out.e_cf_vs[s]));
  out.e_cf = num::scale(cf_mean, 1.0 / static_cast<double>(out.e_cf_vs.size()));
  return out;
}

// Per-query detection view of a forward pass: confidence, category, refined
// centerline, plus the factual edge score matrix.
struct ScenePrediction {
  std::vector<double> confidence;
  std::vector<scene::LaneCategory> category;
  std::vector<scene::Centerline> centerlines;
  Matrix edge_scores;  // E_A
  std::vector<bool> kept;
};

inline ScenePrediction predict(Model& m, const gen::DetectionSample& sample) {
  Tape t;
  ForwardOutput out = model_forward(t, m, sample, 0, true);
  const std::size_t n = out.cls_logits.rows();
  const gen::BevNormalizer norm = sample.normalizer();
  ScenePrediction p;
  p.edge_scores = out.e_a;
  for (std::size_t i = 0; i < n; ++i) {
    double best = -1.0;
    std::size_t best_c = 0;
    for (std::size_t c = 0; c < out.cls_logits.cols(); ++c) {
      const double prob = num::stable_sigmoid(out.cls_logits(i, c));
      if (prob > best) {
        best = prob;
        best_c = c;
      }
    }
    p.confidence.push_back(best);
    p.category.push_back(static_cast<scene::LaneCategory>(best_c));
    scene::Centerline line;
    for (std::size_t k = 0; k < m.config.points_per_lane; ++k)
      line.points.push_back(norm.denormalize({out.reg_points(i, 3 * k + 0),
                                              out.reg_points(i, 3 * k + 1),
                                              out.reg_points(i, 3 * k + 2)}));
    p.centerlines.push_back(std::move(line));
    p.kept.push_back(best >= m.config.node_threshold);
  }
  return p;
}

// Thresholded T2SG from the factual branch only: kept nodes by class
// confidence, edges where E_A >= edge_threshold among kept nodes.
inline scene::SceneGraph infer(Model& m, const gen::DetectionSample& sample,
                               double edge_threshold) {
  if (edge_threshold <= 0.0 || edge_threshold > 1.0)
    throw ConfigError("infer: edge_threshold outside (0, 1]");
  ScenePrediction p = predict(m, sample);
  scene::SceneGraph g;
  std::vector<std::size_t> remap(p.confidence.size(), static_cast<std::size_t>(-1));
  for (std::size_t i = 0; i < p.confidence.size(); ++i) {
    if (!p.kept[i]) continue;
    remap[i] = g.lanes.size();
    g.lanes.push_back({p.category[i], p.centerlines[i]});
  }
  for (std::size_t i = 0; i < p.confidence.size(); ++i)
    for (std::size_t j = 0; j < p.confidence.size(); ++j) {
      if (i == j || !p.kept[i] || !p.kept[j]) continue;
      if (p.edge_scores(i, j) >= edge_threshold) g.edges.insert({remap[i], remap[j]});
    }
  return g;
}

}  // namespace t2sg::model
