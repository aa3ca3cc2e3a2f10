#pragma once

#include <cstdint>
#include <vector>

#include "t2sg/gen/scenario.hpp"
#include "t2sg/numeric/matrix.hpp"
#include "t2sg/numeric/rng.hpp"
#include "t2sg/scene/types.hpp"

namespace t2sg::gen {

// Maps metric BEV coordinates into [0, 1] per axis; regression targets and
// refined centerlines use this normalization.
struct BevNormalizer {
  double x_range = 100.0, y_range = 100.0, z_range = 20.0;

  scene::Point3 normalize(const scene::Point3& p) const {
    return {p.x / x_range + 0.5, p.y / y_range + 0.5, p.z / z_range + 0.5};
  }
  scene::Point3 denormalize(const scene::Point3& p) const {
    return {(p.x - 0.5) * x_range, (p.y - 0.5) * y_range, (p.z - 0.5) * z_range};
  }
};

// Simulated detector output for one scene: noisy centerlines with provenance,
// background distractors, query features, and the scene's traffic elements.
struct DetectionSample {
  int scene_id = 0;
  scene::SceneGraph scene;  // ground truth
  std::vector<scene::Centerline> pred_centerlines;
  std::vector<int> assignment;  // query -> GT lane index, -1 = background
  std::vector<scene::TrafficElement> traffic_elements;
  std::uint64_t feature_seed = 0;
  int feature_dim = 0;
  double x_range = 100.0, y_range = 100.0;
  num::Matrix queries;  // N x feature_dim, derived from the fields above

  std::size_t num_queries() const { return pred_centerlines.size(); }
  BevNormalizer normalizer() const { return {x_range, y_range, 20.0}; }
};

// Query features: a fixed-seed random linear map of the flattened normalized
// noisy centerline coordinates. Rebuildable from serialized fields, so the
// dataset file does not store features.
inline num::Matrix build_queries(const std::vector<scene::Centerline>& centerlines,
                                 std::uint64_t feature_seed, int feature_dim,
                                 const BevNormalizer& norm) {
  const std::size_t n = centerlines.size();
  const std::size_t dim_in = n ? centerlines[0].size() * 3 : 0;
  num::Rng rng(feature_seed);
  const num::Matrix proj = rng.gaussian_matrix(dim_in, feature_dim, 0.0,
                                               1.0 / std::sqrt(static_cast<double>(dim_in)));
  num::Matrix flat(n, dim_in);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& pts = centerlines[i].points;
    for (std::size_t k = 0; k < pts.size(); ++k) {
      const scene::Point3 p = norm.normalize(pts[k]);
      flat(i, 3 * k + 0) = p.x;
      flat(i, 3 * k + 1) = p.y;
      flat(i, 3 * k + 2) = p.z;
    }
  }
  return num::matmul(flat, proj);
}

inline num::Matrix build_queries(DetectionSample& s) {
  return build_queries(s.pred_centerlines, s.feature_seed, s.feature_dim, s.normalizer());
}

// Gaussian per-coordinate perturbation of every GT centerline plus random
// spline distractors assigned to background.
inline DetectionSample perturb_detections(const scene::SceneGraph& scene, const ScenarioSpec& spec,
                                          int scene_id = 0) {
  spec.check();
  num::Rng rng(num::derive_seed(spec.seed, 0x0e7));
  DetectionSample s;
  s.scene_id = scene_id;
  s.scene = scene;
  s.feature_seed = spec.feature_seed;
  s.feature_dim = spec.feature_dim;
  s.x_range = spec.x_range;
  s.y_range = spec.y_range;

  for (const scene::Lane& lane : scene.lanes) {
    scene::Centerline noisy = lane.centerline;
    if (spec.noise_sigma > 0.0)
      for (auto& p : noisy.points) {
        p.x += rng.gaussian(0.0, spec.noise_sigma);
        p.y += rng.gaussian(0.0, spec.noise_sigma);
        p.z += rng.gaussian(0.0, spec.noise_sigma);
      }
    s.pred_centerlines.push_back(std::move(noisy));
    s.assignment.push_back(static_cast<int>(s.assignment.size()));
  }

  for (int d = 0; d < spec.distractor_count; ++d) {
    std::vector<scene::Point3> ctrl;
    for (int k = 0; k < 4; ++k)
      ctrl.push_back({rng.uniform(-0.4, 0.4) * spec.x_range,
                      rng.uniform(-0.4, 0.4) * spec.y_range, 0.0});
    std::vector<scene::Point3> dense;
    for (int k = 0; k < 32; ++k) {
      const double t = static_cast<double>(k) / 31.0;
      const double u = 1.0 - t;
      dense.push_back(ctrl[0] * (u * u * u) + ctrl[1] * (3.0 * u * u * t) +
                      ctrl[2] * (3.0 * u * t * t) + ctrl[3] * (t * t * t));
    }
    scene::Centerline line = detail::resample_by_arclength(dense, spec.points_per_lane);
    detail::apply_ramp(line, spec.ramp_slope);
    s.pred_centerlines.push_back(std::move(line));
    s.assignment.push_back(-1);
  }

  // one element per signal category present, plus the occasional light
  bool present[scene::kNumLaneCategories] = {};
  for (const scene::Lane& lane : scene.lanes) present[static_cast<int>(lane.category)] = true;
  for (std::size_t c = 0; c < scene::kNumLaneCategories; ++c) {
    if (!present[c] || static_cast<scene::LaneCategory>(c) == scene::LaneCategory::kLane) continue;
    scene::TrafficElement te;
    te.category = static_cast<scene::TeCategory>(c);
    const double x1 = rng.uniform(0.0, 0.8), y1 = rng.uniform(0.0, 0.8);
    te.bbox = {x1, y1, x1 + rng.uniform(0.05, 0.2), y1 + rng.uniform(0.05, 0.2)};
    if (spec.noise_sigma > 0.0)
      for (double& v : te.bbox) v += rng.gaussian(0.0, spec.noise_sigma * 0.02);
    s.traffic_elements.push_back(te);
  }
  if (rng.uniform(0.0, 1.0) < 0.5) {
    scene::TrafficElement light;
    light.category = static_cast<scene::TeCategory>(static_cast<int>(scene::TeCategory::kRed) +
                                                    static_cast<int>(rng.index(3)));
    const double x1 = rng.uniform(0.0, 0.8), y1 = rng.uniform(0.0, 0.8);
    light.bbox = {x1, y1, x1 + 0.1, y1 + 0.1};
    s.traffic_elements.push_back(light);
  }

  s.queries = build_queries(s);
  return s;
}

}  // namespace t2sg::gen
