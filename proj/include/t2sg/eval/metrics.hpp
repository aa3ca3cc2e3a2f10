#pragma once

#include <algorithm>
#include <map>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "t2sg/eval/frechet.hpp"
#include "t2sg/numeric/matrix.hpp"
#include "t2sg/scene/types.hpp"

namespace t2sg::eval {

struct PredInstance {
  int scene = 0;
  double confidence = 1.0;
  scene::Centerline line;
  scene::LaneCategory category = scene::LaneCategory::kLane;
};

struct GtInstance {
  int scene = 0;
  scene::Centerline line;
  scene::LaneCategory category = scene::LaneCategory::kLane;
};

struct MatchResult {
  double threshold = 0.0;
  std::vector<std::pair<std::size_t, std::size_t>> pairs;  // (pred, gt)
  std::vector<std::size_t> unmatched_pred, unmatched_gt;
};

namespace detail {

// prediction ranking shared by matching and AP: confidence desc, index asc
inline std::vector<std::size_t> rank_by_confidence(const std::vector<PredInstance>& preds) {
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return preds[a].confidence > preds[b].confidence;
  });
  return order;
}

}  // namespace detail

// Greedy confidence-ordered matching: each prediction takes its nearest
// still-unmatched same-scene GT within the Fréchet threshold. Ties break by
// (confidence, pred index, gt index), so the result is deterministic.
inline MatchResult match_instances(const std::vector<PredInstance>& preds,
                                   const std::vector<GtInstance>& gts, double threshold) {
  if (threshold <= 0.0) throw std::invalid_argument("match_instances: threshold must be > 0");
  MatchResult r;
  r.threshold = threshold;
  std::vector<bool> gt_taken(gts.size(), false);
  std::vector<bool> pred_matched(preds.size(), false);
  for (std::size_t pi : detail::rank_by_confidence(preds)) {
    double best = threshold;
    std::size_t best_gt = gts.size();
    for (std::size_t gi = 0; gi < gts.size(); ++gi) {
      if (gt_taken[gi] || gts[gi].scene != preds[pi].scene) continue;
      const double d = discrete_frechet(preds[pi].line, gts[gi].line);
      if (d < best || (d == best && best_gt == gts.size())) {
        best = d;
        best_gt = gi;
      }
    }
    if (best_gt < gts.size()) {
      gt_taken[best_gt] = true;
      pred_matched[pi] = true;
      r.pairs.push_back({pi, best_gt});
    }
  }
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (!pred_matched[i]) r.unmatched_pred.push_back(i);
  for (std::size_t i = 0; i < gts.size(); ++i)
    if (!gt_taken[i]) r.unmatched_gt.push_back(i);
  return r;
}

// Class-agnostic detection AP with continuous precision interpolation over
// the greedy incremental matching above.
inline double average_precision(const std::vector<PredInstance>& preds,
                                const std::vector<GtInstance>& gts, double threshold) {
  if (gts.empty() || preds.empty()) return 0.0;
  std::vector<bool> gt_taken(gts.size(), false);
  std::vector<double> precision;
  std::vector<bool> is_tp;
  std::size_t tp = 0, fp = 0;
  for (std::size_t pi : detail::rank_by_confidence(preds)) {
    double best = threshold;
    std::size_t best_gt = gts.size();
    for (std::size_t gi = 0; gi < gts.size(); ++gi) {
      if (gt_taken[gi] || gts[gi].scene != preds[pi].scene) continue;
      const double d = discrete_frechet(preds[pi].line, gts[gi].line);
      if (d < best || (d == best && best_gt == gts.size())) {
        best = d;
        best_gt = gi;
      }
    }
    if (best_gt < gts.size()) {
      gt_taken[best_gt] = true;
      ++tp;
    } else {
      ++fp;
    }
    precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
    is_tp.push_back(best_gt < gts.size());
  }
  // recall rises by exactly 1/|gts| at each TP, so the interpolated AP is the
  // mean over GT of the right-max precision at TP ranks
  double ap_sum = 0.0, max_p = 0.0;
  for (std::size_t k = precision.size(); k-- > 0;) {
    max_p = std::max(max_p, precision[k]);
    if (is_tp[k]) ap_sum += max_p;
  }
  return ap_sum / static_cast<double>(gts.size());
}

// mean AP over the categories present in GT
inline double mean_ap(const std::vector<PredInstance>& preds, const std::vector<GtInstance>& gts,
                      double threshold) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t c = 0; c < scene::kNumLaneCategories; ++c) {
    const auto cat = static_cast<scene::LaneCategory>(c);
    std::vector<GtInstance> gt_c;
    for (const auto& g : gts)
      if (g.category == cat) gt_c.push_back(g);
    if (gt_c.empty()) continue;
    std::vector<PredInstance> pred_c;
    for (const auto& p : preds)
      if (p.category == cat) pred_c.push_back(p);
    sum += average_precision(pred_c, gt_c, threshold);
    ++count;
  }
  return count ? sum / static_cast<double>(count) : 0.0;
}

// One scene's prediction: kept lanes plus the factual edge score matrix in
// the same index space.
struct ScenePred {
  std::vector<double> confidence;
  std::vector<scene::LaneCategory> category;
  std::vector<scene::Centerline> centerlines;
  num::Matrix edge_scores;
};

struct SceneGt {
  scene::SceneGraph graph;
  std::vector<scene::TrafficElement> elements;
};

struct PairCounts {
  std::size_t correct = 0;
  std::size_t total = 0;
};

// A@1 counts over all ordered pairs of GT lanes: a pair scores iff both ends
// are matched and the thresholded predicted edge equals the GT edge; pairs
// touching unmatched GT count as errors.
inline PairCounts edge_accuracy_counts(const ScenePred& pred, const scene::SceneGraph& gt,
                                       const MatchResult& match, double edge_threshold) {
  const std::size_t n = gt.lanes.size();
  std::vector<std::size_t> gt_to_pred(n, static_cast<std::size_t>(-1));
  for (const auto& [pi, gi] : match.pairs) gt_to_pred[gi] = pi;
  PairCounts c;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      ++c.total;
      const std::size_t pi = gt_to_pred[i], pj = gt_to_pred[j];
      if (pi == static_cast<std::size_t>(-1) || pj == static_cast<std::size_t>(-1)) continue;
      const bool pred_edge = pred.edge_scores(pi, pj) >= edge_threshold;
      const bool gt_edge = gt.edges.count({i, j}) > 0;
      if (pred_edge == gt_edge) ++c.correct;
    }
  return c;
}

inline double edge_accuracy(const ScenePred& pred, const scene::SceneGraph& gt,
                            const MatchResult& match, double edge_threshold) {
  const PairCounts c = edge_accuracy_counts(pred, gt, match, edge_threshold);
  return c.total ? static_cast<double>(c.correct) / static_cast<double>(c.total) : 0.0;
}

struct VertexApSum {
  double sum = 0.0;
  std::size_t vertices = 0;
};

namespace detail {

// AP of a ranked candidate list against a binary relevance set
inline double ranked_ap(const std::vector<std::pair<double, std::size_t>>& scored,
                        const std::vector<bool>& relevant, std::size_t n_relevant) {
  if (n_relevant == 0) return 0.0;
  std::vector<std::size_t> order(scored.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scored[a].first != scored[b].first) return scored[a].first > scored[b].first;
    return scored[a].second < scored[b].second;
  });
  double sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (!relevant[scored[order[k]].second]) continue;
    ++hits;
    sum += static_cast<double>(hits) / static_cast<double>(k + 1);
  }
  return sum / static_cast<double>(n_relevant);
}

}  // namespace detail

// Lane-lane topology: for each GT lane with at least one successor, the AP of
// all other GT lanes ranked by the predicted edge score (via the matching);
// unmatched GT lanes contribute 0, unmatched candidates rank last.
inline VertexApSum top_ll_counts(const ScenePred& pred, const scene::SceneGraph& gt,
                                 const MatchResult& match) {
  const std::size_t n = gt.lanes.size();
  std::vector<std::size_t> gt_to_pred(n, static_cast<std::size_t>(-1));
  for (const auto& [pi, gi] : match.pairs) gt_to_pred[gi] = pi;
  VertexApSum r;
  for (std::size_t g = 0; g < n; ++g) {
    std::vector<bool> relevant(n, false);
    std::size_t n_rel = 0;
    for (const auto& e : gt.edges)
      if (e.first == g) {
        relevant[e.second] = true;
        ++n_rel;
      }
    if (n_rel == 0) continue;
    ++r.vertices;
    if (gt_to_pred[g] == static_cast<std::size_t>(-1)) continue;  // contributes 0
    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t o = 0; o < n; ++o) {
      if (o == g) continue;
      const double s = gt_to_pred[o] == static_cast<std::size_t>(-1)
                           ? -1.0
                           : pred.edge_scores(gt_to_pred[g], gt_to_pred[o]);
      scored.push_back({s, o});
    }
    r.sum += detail::ranked_ap(scored, relevant, n_rel);
  }
  return r;
}

inline double top_ll(const ScenePred& pred, const scene::SceneGraph& gt,
                     const MatchResult& match) {
  const VertexApSum r = top_ll_counts(pred, gt, match);
  return r.vertices ? r.sum / static_cast<double>(r.vertices) : 0.0;
}

// Lane-element topology: predicted connectivity is pure category equality
// between the matched prediction's class and the element's class; scored as
// vertex AP against GT category-equality pairs. Lights are out of scope.
inline VertexApSum top_lt_counts(const ScenePred& pred, const scene::SceneGraph& gt,
                                 const std::vector<scene::TrafficElement>& elements,
                                 const MatchResult& match) {
  const std::size_t n = gt.lanes.size();
  std::vector<std::size_t> gt_to_pred(n, static_cast<std::size_t>(-1));
  for (const auto& [pi, gi] : match.pairs) gt_to_pred[gi] = pi;
  std::vector<std::size_t> candidates;
  for (std::size_t e = 0; e < elements.size(); ++e)
    if (!scene::is_light(elements[e].category)) candidates.push_back(e);
  VertexApSum r;
  for (std::size_t g = 0; g < n; ++g) {
    std::vector<bool> relevant(elements.size(), false);
    std::size_t n_rel = 0;
    for (std::size_t e : candidates)
      if (scene::same_signal(gt.lanes[g].category, elements[e].category)) {
        relevant[e] = true;
        ++n_rel;
      }
    if (n_rel == 0) continue;
    ++r.vertices;
    if (gt_to_pred[g] == static_cast<std::size_t>(-1)) continue;
    const scene::LaneCategory pred_cat = pred.category[gt_to_pred[g]];
    std::vector<std::pair<double, std::size_t>> scored;
    for (std::size_t e : candidates)
      scored.push_back({scene::same_signal(pred_cat, elements[e].category) ? 1.0 : 0.0, e});
    r.sum += detail::ranked_ap(scored, relevant, n_rel);
  }
  return r;
}

inline double top_lt(const ScenePred& pred, const scene::SceneGraph& gt,
                     const std::vector<scene::TrafficElement>& elements,
                     const MatchResult& match) {
  const VertexApSum r = top_lt_counts(pred, gt, elements, match);
  return r.vertices ? r.sum / static_cast<double>(r.vertices) : 0.0;
}

// OpenLane-V2 score
inline double ols(double det_l, double det_t, double top_ll, double top_lt) {
  for (double v : {det_l, det_t, top_ll, top_lt})
    if (!(v >= 0.0 && v <= 1.0)) throw std::domain_error("ols: inputs must lie in [0, 1]");
  return 0.25 * (det_l + det_t + std::sqrt(top_ll) + std::sqrt(top_lt));
}

struct EvalReport {
  std::map<double, double> ap;             // threshold -> class-agnostic AP
  std::map<double, double> map_per_class;  // threshold -> mAP
  std::map<double, double> a_at_1;         // threshold -> edge accuracy
  double det_l = 0.0, det_t = 0.0, top_ll = 0.0, top_lt = 0.0, ols_score = 0.0;
  bool top_ll_defined = false, top_lt_defined = false;
};

namespace detail {

inline double box_iou(const std::array<double, 4>& a, const std::array<double, 4>& b) {
  const double ix = std::max(0.0, std::min(a[2], b[2]) - std::max(a[0], b[0]));
  const double iy = std::max(0.0, std::min(a[3], b[3]) - std::max(a[1], b[1]));
  const double inter = ix * iy;
  const double area_a = std::max(0.0, a[2] - a[0]) * std::max(0.0, a[3] - a[1]);
  const double area_b = std::max(0.0, b[2] - b[0]) * std::max(0.0, b[3] - b[1]);
  const double uni = area_a + area_b - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

struct ElementRef {
  int scene;
  std::size_t idx;
};

// mAP of element records against GT elements, greedy IoU matching; at desk
// scale the records score against themselves (detection is out of scope)
inline double element_map(const std::vector<SceneGt>& gts, double iou_thr = 0.5) {
  double sum = 0.0;
  std::size_t n_cats = 0;
  for (int c = 0; c <= static_cast<int>(scene::TeCategory::kYellow); ++c) {
    const auto cat = static_cast<scene::TeCategory>(c);
    std::vector<ElementRef> gt_c, pred_c;
    for (std::size_t s = 0; s < gts.size(); ++s)
      for (std::size_t e = 0; e < gts[s].elements.size(); ++e)
        if (gts[s].elements[e].category == cat) {
          gt_c.push_back({static_cast<int>(s), e});
          pred_c.push_back({static_cast<int>(s), e});
        }
    if (gt_c.empty()) continue;
    ++n_cats;
    std::vector<bool> taken(gt_c.size(), false);
    std::size_t tp = 0, fp = 0;
    std::vector<double> precision;
    std::vector<bool> is_tp;
    for (const auto& p : pred_c) {
      double best = -1.0;
      std::size_t best_g = gt_c.size();
      for (std::size_t g = 0; g < gt_c.size(); ++g) {
        if (taken[g] || gt_c[g].scene != p.scene) continue;
        const double iou = box_iou(gts[p.scene].elements[p.idx].bbox,
                                   gts[gt_c[g].scene].elements[gt_c[g].idx].bbox);
        if (iou >= iou_thr && iou > best) {
          best = iou;
          best_g = g;
        }
      }
      if (best_g < gt_c.size()) {
        taken[best_g] = true;
        ++tp;
      } else {
        ++fp;
      }
      precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
      is_tp.push_back(best_g < gt_c.size());
    }
    double ap_sum = 0.0, max_p = 0.0;
    for (std::size_t k = precision.size(); k-- > 0;) {
      max_p = std::max(max_p, precision[k]);
      if (is_tp[k]) ap_sum += max_p;
    }
    sum += ap_sum / static_cast<double>(gt_c.size());
  }
  return n_cats ? sum / static_cast<double>(n_cats) : 0.0;
}

}  // namespace detail

// Full metric suite over a set of scenes. Detection AP pools predictions
// across scenes; A@1 pools pair counts; TOP metrics pool vertex APs. DET_l
// and the TOP scalars average the per-threshold values.
inline EvalReport evaluate_scenes(const std::vector<ScenePred>& preds,
                                  const std::vector<SceneGt>& gts, double edge_threshold,
                                  const std::vector<double>& thresholds = {1.0, 2.0, 3.0}) {
  if (preds.size() != gts.size())
    throw std::invalid_argument("evaluate_scenes: scene count mismatch");
  EvalReport rep;

  std::vector<PredInstance> all_preds;
  std::vector<GtInstance> all_gts;
  for (std::size_t s = 0; s < preds.size(); ++s) {
    for (std::size_t i = 0; i < preds[s].confidence.size(); ++i)
      all_preds.push_back({static_cast<int>(s), preds[s].confidence[i], preds[s].centerlines[i],
                           preds[s].category[i]});
    for (const auto& lane : gts[s].graph.lanes)
      all_gts.push_back({static_cast<int>(s), lane.centerline, lane.category});
  }

  double top_ll_acc = 0.0, top_lt_acc = 0.0;
  for (double thr : thresholds) {
    rep.ap[thr] = average_precision(all_preds, all_gts, thr);
    rep.map_per_class[thr] = mean_ap(all_preds, all_gts, thr);
    PairCounts pairs;
    VertexApSum vll, vlt;
    for (std::size_t s = 0; s < preds.size(); ++s) {
      std::vector<PredInstance> sp;
      std::vector<GtInstance> sg;
      for (std::size_t i = 0; i < preds[s].confidence.size(); ++i)
        sp.push_back({0, preds[s].confidence[i], preds[s].centerlines[i], preds[s].category[i]});
      for (const auto& lane : gts[s].graph.lanes)
        sg.push_back({0, lane.centerline, lane.category});
      const MatchResult match = match_instances(sp, sg, thr);
      const PairCounts pc = edge_accuracy_counts(preds[s], gts[s].graph, match, edge_threshold);
      pairs.correct += pc.correct;
      pairs.total += pc.total;
      const VertexApSum sll = top_ll_counts(preds[s], gts[s].graph, match);
      vll.sum += sll.sum;
      vll.vertices += sll.vertices;
      const VertexApSum slt = top_lt_counts(preds[s], gts[s].graph, gts[s].elements, match);
      vlt.sum += slt.sum;
      vlt.vertices += slt.vertices;
    }
    rep.a_at_1[thr] =
        pairs.total ? static_cast<double>(pairs.correct) / static_cast<double>(pairs.total) : 0.0;
    top_ll_acc += vll.vertices ? vll.sum / static_cast<double>(vll.vertices) : 0.0;
    top_lt_acc += vlt.vertices ? vlt.sum / static_cast<double>(vlt.vertices) : 0.0;
    rep.top_ll_defined = rep.top_ll_defined || vll.vertices > 0;
    rep.top_lt_defined = rep.top_lt_defined || vlt.vertices > 0;
  }

  const double nt = static_cast<double>(thresholds.size());
  double ap_acc = 0.0;
  for (const auto& [thr, v] : rep.ap) ap_acc += v;
  rep.det_l = ap_acc / nt;
  rep.top_ll = top_ll_acc / nt;
  rep.top_lt = top_lt_acc / nt;
  rep.det_t = detail::element_map(gts);
  rep.ols_score = ols(rep.det_l, rep.det_t, rep.top_ll, rep.top_lt);
  return rep;
}

}  // namespace t2sg::eval
