#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "t2sg/errors.hpp"
#include "t2sg/gen/detections.hpp"

namespace t2sg::gen {

constexpr int kDatasetFormatVersion = 1;

namespace detail {

inline nlohmann::json points_to_json(const scene::Centerline& c) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& p : c.points) arr.push_back({p.x, p.y, p.z});
  return arr;
}

inline scene::Centerline points_from_json(const nlohmann::json& arr) {
  scene::Centerline c;
  for (const auto& p : arr) c.points.push_back({p.at(0), p.at(1), p.at(2)});
  return c;
}

}  // namespace detail

inline nlohmann::json sample_to_json(const DetectionSample& s) {
  nlohmann::json j;
  j["scene_id"] = s.scene_id;
  nlohmann::json lanes = nlohmann::json::array();
  for (const auto& lane : s.scene.lanes)
    lanes.push_back({{"category", scene::to_string(lane.category)},
                     {"points", detail::points_to_json(lane.centerline)}});
  j["lanes"] = std::move(lanes);
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : s.scene.edges) edges.push_back({e.first, e.second});
  j["edges"] = std::move(edges);
  nlohmann::json det;
  nlohmann::json preds = nlohmann::json::array();
  for (const auto& c : s.pred_centerlines) preds.push_back(detail::points_to_json(c));
  det["centerlines"] = std::move(preds);
  det["assignment"] = s.assignment;
  det["feature_seed"] = s.feature_seed;
  det["feature_dim"] = s.feature_dim;
  det["bev"] = {s.x_range, s.y_range};
  j["detections"] = std::move(det);
  nlohmann::json tes = nlohmann::json::array();
  for (const auto& te : s.traffic_elements)
    tes.push_back({{"bbox", te.bbox}, {"category", scene::to_string(te.category)}});
  j["traffic_elements"] = std::move(tes);
  return j;
}

inline DetectionSample sample_from_json(const nlohmann::json& j) {
  DetectionSample s;
  s.scene_id = j.at("scene_id");
  for (const auto& lane : j.at("lanes")) {
    scene::Lane l;
    l.category = scene::lane_category_from_string(lane.at("category"));
    l.centerline = detail::points_from_json(lane.at("points"));
    s.scene.lanes.push_back(std::move(l));
  }
  for (const auto& e : j.at("edges"))
    s.scene.edges.insert({e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>()});
  const auto& det = j.at("detections");
  for (const auto& c : det.at("centerlines"))
    s.pred_centerlines.push_back(detail::points_from_json(c));
  s.assignment = det.at("assignment").get<std::vector<int>>();
  s.feature_seed = det.at("feature_seed");
  s.feature_dim = det.at("feature_dim");
  s.x_range = det.at("bev").at(0);
  s.y_range = det.at("bev").at(1);
  for (const auto& te : j.at("traffic_elements")) {
    scene::TrafficElement t;
    t.bbox = te.at("bbox");
    t.category = scene::te_category_from_string(te.at("category"));
    s.traffic_elements.push_back(t);
  }
  s.queries = build_queries(s);
  return s;
}

// One header line, then one JSON record per line. Doubles serialize with
// round-trip precision, so write/read is lossless.
inline void write_dataset(const std::vector<DetectionSample>& samples, const std::string& path,
                          const nlohmann::json& config_echo = nlohmann::json::object()) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open for write: " + path);
  nlohmann::json header{{"format_version", kDatasetFormatVersion}, {"config", config_echo}};
  out << header.dump() << "\n";
  for (const auto& s : samples) out << sample_to_json(s).dump() << "\n";
  if (!out) throw DataError("write failed: " + path);
}

inline std::vector<DetectionSample> read_dataset(const std::string& path,
                                                 nlohmann::json* config_echo = nullptr) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open: " + path);
  std::string line;
  if (!std::getline(in, line)) throw DataError(path + ": empty file, missing header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": line 1: bad header: " + e.what());
  }
  if (!header.contains("format_version") || header["format_version"] != kDatasetFormatVersion)
    throw DataError(path + ": unsupported format_version (want " +
                    std::to_string(kDatasetFormatVersion) + ")");
  if (config_echo) *config_echo = header.value("config", nlohmann::json::object());
  std::vector<DetectionSample> samples;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      samples.push_back(sample_from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path + ": line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return samples;
}

}  // namespace t2sg::gen
