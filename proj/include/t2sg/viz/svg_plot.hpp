#pragma once

#include <algorithm>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "t2sg/errors.hpp"
#include "t2sg/eval/frechet.hpp"
#include "t2sg/eval/metrics.hpp"
#include "t2sg/scene/types.hpp"

namespace t2sg::viz {

struct PlotOptions {
  double canvas = 800.0;  // px, square
  double margin = 40.0;
  double match_tolerance = 3.0;  // meters, comparison mode
};

namespace detail {

struct Mapper {
  double min_x = -50.0, min_y = -50.0, scale = 1.0, canvas = 800.0, margin = 40.0;

  static Mapper fit(const std::vector<const scene::SceneGraph*>& graphs, const PlotOptions& opt) {
    double lo_x = -1.0, hi_x = 1.0, lo_y = -1.0, hi_y = 1.0;
    bool any = false;
    for (const auto* g : graphs)
      for (const auto& lane : g->lanes)
        for (const auto& p : lane.centerline.points) {
          if (!any) {
            lo_x = hi_x = p.x;
            lo_y = hi_y = p.y;
            any = true;
          }
          lo_x = std::min(lo_x, p.x);
          hi_x = std::max(hi_x, p.x);
          lo_y = std::min(lo_y, p.y);
          hi_y = std::max(hi_y, p.y);
        }
    Mapper m;
    m.canvas = opt.canvas;
    m.margin = opt.margin;
    m.min_x = lo_x;
    m.min_y = lo_y;
    const double span = std::max({hi_x - lo_x, hi_y - lo_y, 1e-9});
    m.scale = (opt.canvas - 2.0 * opt.margin) / span;
    return m;
  }

  double px(double x) const { return margin + (x - min_x) * scale; }
  // svg y axis points down; flip so the BEV keeps north up
  double py(double y) const { return canvas - margin - (y - min_y) * scale; }
};

inline void draw_lane(std::ostringstream& out, const scene::Lane& lane, const Mapper& m,
                      const std::string& color, bool label) {
  out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
  for (const auto& p : lane.centerline.points) out << m.px(p.x) << "," << m.py(p.y) << " ";
  out << "\"/>\n";
  // arrowhead at the end point, oriented by the last segment
  const auto& pts = lane.centerline.points;
  const auto& a = pts[pts.size() - 2];
  const auto& b = pts.back();
  const double dx = m.px(b.x) - m.px(a.x), dy = m.py(b.y) - m.py(a.y);
  const double len = std::max(std::sqrt(dx * dx + dy * dy), 1e-9);
  const double ux = dx / len, uy = dy / len;
  const double s = 6.0;
  out << "<path d=\"M " << m.px(b.x) << " " << m.py(b.y) << " L "
      << m.px(b.x) - s * (ux + 0.5 * uy) << " " << m.py(b.y) - s * (uy - 0.5 * ux) << " L "
      << m.px(b.x) - s * (ux - 0.5 * uy) << " " << m.py(b.y) - s * (uy + 0.5 * ux)
      << " Z\" fill=\"" << color << "\"/>\n";
  if (label) {
    const auto& mid = pts[pts.size() / 2];
    out << "<text x=\"" << m.px(mid.x) + 3 << "\" y=\"" << m.py(mid.y) - 3
        << "\" font-size=\"9\" fill=\"#555\">" << scene::to_string(lane.category) << "</text>\n";
  }
}

inline void draw_edge(std::ostringstream& out, const scene::SceneGraph& g, std::size_t i,
                      std::size_t j, const Mapper& m, const std::string& color) {
  const auto& a = g.lanes[i].centerline.end();
  const auto& b = g.lanes[j].centerline.start();
  out << "<line x1=\"" << m.px(a.x) << "\" y1=\"" << m.py(a.y) << "\" x2=\"" << m.px(b.x)
      << "\" y2=\"" << m.py(b.y) << "\" stroke=\"" << color
      << "\" stroke-width=\"1.5\" stroke-dasharray=\"4 3\"/>\n";
  out << "<circle cx=\"" << m.px(b.x) << "\" cy=\"" << m.py(b.y) << "\" r=\"2.5\" fill=\"" << color
      << "\"/>\n";
}

inline std::string svg_open(double canvas) {
  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << canvas << "\" height=\"" << canvas
      << "\" viewBox=\"0 0 " << canvas << " " << canvas << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  return out.str();
}

}  // namespace detail

// Top-down BEV rendering: lanes as arrows start -> end with category labels,
// edges as dashed end-to-start connectors.
inline std::string scene_to_svg(const scene::SceneGraph& g, const PlotOptions& opt = {}) {
  const detail::Mapper m = detail::Mapper::fit({&g}, opt);
  std::ostringstream out;
  out << detail::svg_open(opt.canvas);
  for (const auto& e : g.edges) detail::draw_edge(out, g, e.first, e.second, m, "#888888");
  for (const auto& lane : g.lanes) detail::draw_lane(out, lane, m, "#1f4e9c", true);
  out << "</svg>\n";
  return out.str();
}

// Comparison rendering: green = correct prediction, red = erroneous
// prediction, blue = missing (GT without a predicted counterpart).
inline std::string comparison_svg(const scene::SceneGraph& pred, const scene::SceneGraph& gt,
                                  const PlotOptions& opt = {}) {
  const detail::Mapper m = detail::Mapper::fit({&pred, &gt}, opt);

  std::vector<eval::PredInstance> pi;
  std::vector<eval::GtInstance> gi;
  for (const auto& lane : pred.lanes) pi.push_back({0, 1.0, lane.centerline, lane.category});
  for (const auto& lane : gt.lanes) gi.push_back({0, lane.centerline, lane.category});
  eval::MatchResult match;
  if (!pi.empty() && !gi.empty()) match = eval::match_instances(pi, gi, opt.match_tolerance);

  std::vector<std::size_t> pred_to_gt(pred.lanes.size(), static_cast<std::size_t>(-1));
  std::vector<std::size_t> gt_to_pred(gt.lanes.size(), static_cast<std::size_t>(-1));
  for (const auto& [p, g] : match.pairs) {
    pred_to_gt[p] = g;
    gt_to_pred[g] = p;
  }

  std::ostringstream out;
  out << detail::svg_open(opt.canvas);
  // edges: predicted vs GT through the lane matching
  for (const auto& e : pred.edges) {
    const std::size_t gs = pred_to_gt[e.first], ge = pred_to_gt[e.second];
    const bool correct = gs != static_cast<std::size_t>(-1) && ge != static_cast<std::size_t>(-1) &&
                         gt.edges.count({gs, ge}) > 0;
    detail::draw_edge(out, pred, e.first, e.second, m, correct ? "#1a9c2f" : "#c62828");
  }
  for (const auto& e : gt.edges) {
    const std::size_t ps = gt_to_pred[e.first], pe = gt_to_pred[e.second];
    const bool predicted = ps != static_cast<std::size_t>(-1) &&
                           pe != static_cast<std::size_t>(-1) && pred.edges.count({ps, pe}) > 0;
    if (!predicted) detail::draw_edge(out, gt, e.first, e.second, m, "#1e56c6");
  }
  for (std::size_t i = 0; i < pred.lanes.size(); ++i)
    detail::draw_lane(out, pred.lanes[i], m,
                      pred_to_gt[i] != static_cast<std::size_t>(-1) ? "#1a9c2f" : "#c62828", true);
  for (std::size_t i = 0; i < gt.lanes.size(); ++i)
    if (gt_to_pred[i] == static_cast<std::size_t>(-1))
      detail::draw_lane(out, gt.lanes[i], m, "#1e56c6", true);
  out << "</svg>\n";
  return out.str();
}

inline void write_svg(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for write: " + path);
  out << content;
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace t2sg::viz
