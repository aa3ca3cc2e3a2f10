#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "t2sg/errors.hpp"
#include "t2sg/numeric/rng.hpp"
#include "t2sg/scene/graph_ops.hpp"
#include "t2sg/scene/types.hpp"

namespace t2sg::gen {

enum class ScenarioKind { kStraight, kTJunction, kCrossroad, kMultiway };

inline const char* to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::kStraight: return "straight";
    case ScenarioKind::kTJunction: return "t_junction";
    case ScenarioKind::kCrossroad: return "crossroad";
    case ScenarioKind::kMultiway: return "multiway";
  }
  return "straight";
}

inline ScenarioKind scenario_kind_from_string(const std::string& s) {
  if (s == "straight") return ScenarioKind::kStraight;
  if (s == "t_junction") return ScenarioKind::kTJunction;
  if (s == "crossroad") return ScenarioKind::kCrossroad;
  if (s == "multiway") return ScenarioKind::kMultiway;
  throw ConfigError("unknown scenario kind: " + s);
}

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::kCrossroad;
  int multiway_arms = 5;  // k, only for kMultiway
  int lanes_per_arm = 1;
  double noise_sigma = 0.0;     // meters, detector noise
  int distractor_count = 0;     // background queries
  std::uint64_t seed = 0;
  double x_range = 100.0, y_range = 100.0;  // bev extent, scene centered at origin
  int points_per_lane = 11;                 // l
  double ramp_slope = 0.0;                  // z = ramp_slope * x
  std::uint64_t feature_seed = 0x5eedULL;   // fixed across a dataset
  int feature_dim = 40;

  void check() const {
    if (kind == ScenarioKind::kMultiway && (multiway_arms < 3 || multiway_arms > 6))
      throw ConfigError("multiway arms must be in [3, 6]");
    if (lanes_per_arm < 1) throw ConfigError("lanes_per_arm must be >= 1");
    if (noise_sigma < 0.0) throw ConfigError("noise_sigma must be >= 0");
    if (distractor_count < 0) throw ConfigError("distractor_count must be >= 0");
    if (x_range <= 0.0 || y_range <= 0.0) throw ConfigError("bev extent must be positive");
    if (points_per_lane < 2) throw ConfigError("points_per_lane must be >= 2");
    if (feature_dim < 1) throw ConfigError("feature_dim must be >= 1");
  }
};

namespace detail {

constexpr double kLaneWidth = 3.5;
constexpr double kPi = 3.14159265358979323846;

inline double wrap_deg(double a) {
  while (a > 180.0) a -= 360.0;
  while (a <= -180.0) a += 360.0;
  return a;
}

inline scene::Point3 polar(double radius, double deg) {
  const double r = deg * kPi / 180.0;
  return {radius * std::cos(r), radius * std::sin(r), 0.0};
}

// straight segment resampled to n points
inline scene::Centerline segment(scene::Point3 a, scene::Point3 b, int n) {
  scene::Centerline c;
  c.points.reserve(n);
  for (int k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) / (n - 1);
    c.points.push_back(a + (b - a) * t);
  }
  return c;
}

inline scene::Centerline resample_by_arclength(const std::vector<scene::Point3>& pts, int n) {
  std::vector<double> cum(pts.size(), 0.0);
  for (std::size_t i = 1; i < pts.size(); ++i)
    cum[i] = cum[i - 1] + scene::l2_dist(pts[i - 1], pts[i]);
  const double total = cum.back();
  scene::Centerline out;
  out.points.reserve(n);
  std::size_t seg = 0;
  for (int k = 0; k < n; ++k) {
    const double s = total * static_cast<double>(k) / (n - 1);
    while (seg + 1 < pts.size() - 1 && cum[seg + 1] < s) ++seg;
    const double span = cum[seg + 1] - cum[seg];
    const double t = span > 0.0 ? (s - cum[seg]) / span : 0.0;
    out.points.push_back(pts[seg] + (pts[seg + 1] - pts[seg]) * t);
  }
  out.points.front() = pts.front();
  out.points.back() = pts.back();
  return out;
}

// cubic Bezier between fixed endpoints whose tangents follow the given headings
inline scene::Centerline connector_curve(scene::Point3 p0, scene::Point3 p3, double heading_in_deg,
                                         double heading_out_deg, int n) {
  const double span = scene::l2_dist(p0, p3);
  const double c = std::max(0.35 * span, 2.0);
  const scene::Point3 p1 = p0 + polar(c, heading_in_deg);
  const scene::Point3 p2 = p3 - polar(c, heading_out_deg);
  std::vector<scene::Point3> dense;
  const int m = 64;
  dense.reserve(m);
  for (int k = 0; k < m; ++k) {
    const double t = static_cast<double>(k) / (m - 1);
    const double u = 1.0 - t;
    dense.push_back(p0 * (u * u * u) + p1 * (3.0 * u * u * t) + p2 * (3.0 * u * t * t) +
                    p3 * (t * t * t));
  }
  return resample_by_arclength(dense, n);
}

// connector category from the signed heading change in degrees
inline scene::LaneCategory turn_category(double delta_deg) {
  const double d = wrap_deg(delta_deg);
  if (std::abs(d) >= 155.0) return scene::LaneCategory::kUTurn;
  if (d > 25.0) return scene::LaneCategory::kTurnLeft;
  if (d < -25.0) return scene::LaneCategory::kTurnRight;
  if (d > 10.0) return scene::LaneCategory::kSlightLeft;
  if (d < -10.0) return scene::LaneCategory::kSlightRight;
  return scene::LaneCategory::kGoStraight;
}

inline void apply_ramp(scene::Centerline& c, double slope) {
  if (slope == 0.0) return;
  for (auto& p : c.points) p.z = slope * p.x;
}

}  // namespace detail

// Deterministic procedural scene layout. Arm lanes live outside a central
// junction disc; connector lanes join each incoming arm to every other arm's
// outgoing lane. Edges are declared from construction (shared endpoints), so
// gt_connectivity over the result must reproduce them exactly.
inline scene::SceneGraph generate_scene(const ScenarioSpec& spec) {
  spec.check();
  num::Rng rng(num::derive_seed(spec.seed, 0x51));
  scene::SceneGraph g;
  const int l = spec.points_per_lane;
  const int m = spec.lanes_per_arm;
  const double w = detail::kLaneWidth;
  const double half = 0.5 * std::min(spec.x_range, spec.y_range);

  // per-scene layout jitter so no two seeds produce the same geometry
  const double rot = rng.uniform(0.0, 360.0);
  const scene::Point3 shift{rng.uniform(-5.0, 5.0), rng.uniform(-5.0, 5.0), 0.0};

  if (spec.kind == ScenarioKind::kStraight) {
    const int n_segments = 2;
    const double road_half = (half - 10.0) * rng.uniform(0.75, 1.0);
    const double seg_len = road_half * 2.0 / n_segments;
    for (int q = 0; q < m; ++q) {
      const double off = (q - 0.5 * (m - 1)) * w;
      const scene::Point3 base =
          shift + detail::polar(off, rot - 90.0) + detail::polar(-road_half, rot);
      std::size_t prev = 0;
      for (int s = 0; s < n_segments; ++s) {
        scene::Lane lane;
        lane.category =
            s == 0 ? scene::LaneCategory::kLane : scene::LaneCategory::kGoStraight;
        lane.centerline = detail::segment(base + detail::polar(s * seg_len, rot),
                                          base + detail::polar((s + 1) * seg_len, rot), l);
        detail::apply_ramp(lane.centerline, spec.ramp_slope);
        g.lanes.push_back(lane);
        if (s > 0) g.edges.insert({prev, g.lanes.size() - 1});
        prev = g.lanes.size() - 1;
      }
    }
    return g;
  }

  // junction kinds: collect arm angles
  std::vector<double> arms;
  switch (spec.kind) {
    case ScenarioKind::kTJunction:
      arms = {detail::wrap_deg(180.0 + rot), detail::wrap_deg(0.0 + rot),
              detail::wrap_deg(270.0 + rot)};
      break;
    case ScenarioKind::kCrossroad:
      for (int i = 0; i < 4; ++i) arms.push_back(detail::wrap_deg(i * 90.0 + rot));
      break;
    case ScenarioKind::kMultiway: {
      const int k = spec.multiway_arms;
      for (int i = 0; i < k; ++i)
        arms.push_back(detail::wrap_deg(i * 360.0 / k + rot + rng.uniform(-15.0, 15.0)));
      break;
    }
    default:
      break;
  }

  const std::size_t n_arms = arms.size();
  const double radius = 8.0 + 1.5 * w * (m - 1);
  const double arm_len_max = half - radius - 10.0;
  if (arm_len_max < 5.0) throw ConfigError("bev extent too small for junction layout");
  std::vector<double> arm_len;
  for (std::size_t a = 0; a < n_arms; ++a)
    arm_len.push_back(arm_len_max * rng.uniform(0.7, 1.0));

  // entry/exit anchor of arm a, lane q (right-hand traffic: each direction
  // keeps to its own side of the arm axis)
  auto entry_point = [&](std::size_t a, int q) {
    const double off = (0.5 + q) * w;
    return shift + detail::polar(radius, arms[a]) + detail::polar(off, arms[a] + 90.0);
  };
  auto exit_point = [&](std::size_t a, int q) {
    const double off = (0.5 + q) * w;
    return shift + detail::polar(radius, arms[a]) + detail::polar(off, arms[a] - 90.0);
  };

  std::vector<std::vector<std::size_t>> incoming_idx(n_arms), outgoing_idx(n_arms);

  // movement availability per incoming arm, for the no_* categories
  auto has_turn = [&](std::size_t a, bool left) {
    for (std::size_t b = 0; b < n_arms; ++b) {
      if (b == a) continue;
      const double d = detail::wrap_deg(arms[b] - arms[a] - 180.0);
      if (left && d > 25.0 && d < 155.0) return true;
      if (!left && d < -25.0 && d > -155.0) return true;
    }
    return false;
  };

  for (std::size_t a = 0; a < n_arms; ++a) {
    scene::LaneCategory in_cat = scene::LaneCategory::kNoUTurn;
    if (!has_turn(a, true))
      in_cat = scene::LaneCategory::kNoLeftTurn;
    else if (!has_turn(a, false))
      in_cat = scene::LaneCategory::kNoRightTurn;
    for (int q = 0; q < m; ++q) {
      scene::Lane in;
      in.category = in_cat;
      const scene::Point3 e = entry_point(a, q);
      in.centerline = detail::segment(e + detail::polar(arm_len[a], arms[a]), e, l);
      detail::apply_ramp(in.centerline, spec.ramp_slope);
      incoming_idx[a].push_back(g.lanes.size());
      g.lanes.push_back(in);
    }
  }
  for (std::size_t a = 0; a < n_arms; ++a) {
    for (int q = 0; q < m; ++q) {
      scene::Lane out;
      out.category = scene::LaneCategory::kLane;
      const scene::Point3 s = exit_point(a, q);
      out.centerline = detail::segment(s, s + detail::polar(arm_len[a], arms[a]), l);
      detail::apply_ramp(out.centerline, spec.ramp_slope);
      outgoing_idx[a].push_back(g.lanes.size());
      g.lanes.push_back(out);
    }
  }
  for (std::size_t a = 0; a < n_arms; ++a) {
    for (std::size_t b = 0; b < n_arms; ++b) {
      if (b == a) continue;
      const double heading_in = detail::wrap_deg(arms[a] + 180.0);
      const double heading_out = arms[b];
      for (int q = 0; q < m; ++q) {
        scene::Lane conn;
        conn.category = detail::turn_category(heading_out - heading_in);
        conn.centerline = detail::connector_curve(entry_point(a, q), exit_point(b, q),
                                                  heading_in, heading_out, l);
        detail::apply_ramp(conn.centerline, spec.ramp_slope);
        const std::size_t ci = g.lanes.size();
        g.lanes.push_back(conn);
        g.edges.insert({incoming_idx[a][q], ci});
        g.edges.insert({ci, outgoing_idx[b][q]});
      }
    }
  }
  return g;
}

}  // namespace t2sg::gen
