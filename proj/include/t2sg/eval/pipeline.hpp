#pragma once

#include <vector>

#include "t2sg/eval/metrics.hpp"
#include "t2sg/gen/detections.hpp"
#include "t2sg/model/topoformer.hpp"

namespace t2sg::eval {

// Kept queries only; the edge score matrix is re-indexed to match.
inline ScenePred to_scene_pred(const model::ScenePrediction& p) {
  ScenePred out;
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < p.confidence.size(); ++i)
    if (p.kept[i]) keep.push_back(i);
  out.edge_scores = num::Matrix(keep.size(), keep.size());
  for (std::size_t a = 0; a < keep.size(); ++a) {
    out.confidence.push_back(p.confidence[keep[a]]);
    out.category.push_back(p.category[keep[a]]);
    out.centerlines.push_back(p.centerlines[keep[a]]);
    for (std::size_t b = 0; b < keep.size(); ++b)
      out.edge_scores(a, b) = p.edge_scores(keep[a], keep[b]);
  }
  return out;
}

inline SceneGt to_scene_gt(const gen::DetectionSample& s) {
  return SceneGt{s.scene, s.traffic_elements};
}

// GT recast as a perfect prediction of itself (confidence 1, adjacency as
// scores); evaluating this must produce all-ones metrics.
inline ScenePred gt_as_pred(const gen::DetectionSample& s) {
  ScenePred out;
  const std::size_t n = s.scene.lanes.size();
  out.edge_scores = num::Matrix(n, n);
  for (const auto& lane : s.scene.lanes) {
    out.confidence.push_back(1.0);
    out.category.push_back(lane.category);
    out.centerlines.push_back(lane.centerline);
  }
  for (const auto& e : s.scene.edges) out.edge_scores(e.first, e.second) = 1.0;
  return out;
}

inline EvalReport evaluate_model(model::Model& m, const std::vector<gen::DetectionSample>& samples,
                                 const std::vector<double>& thresholds = {1.0, 2.0, 3.0}) {
  std::vector<ScenePred> preds;
  std::vector<SceneGt> gts;
  preds.reserve(samples.size());
  gts.reserve(samples.size());
  for (const auto& s : samples) {
    preds.push_back(to_scene_pred(model::predict(m, s)));
    gts.push_back(to_scene_gt(s));
  }
  return evaluate_scenes(preds, gts, m.config.edge_threshold, thresholds);
}

}  // namespace t2sg::eval
