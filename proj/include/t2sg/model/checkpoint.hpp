#pragma once

#include <fstream>
#include <string>

#include <json.hpp>

#include "t2sg/errors.hpp"
#include "t2sg/model/topoformer.hpp"

namespace t2sg::model {

constexpr int kCheckpointFormatVersion = 1;

inline nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json data = nlohmann::json::array();
  for (std::size_t i = 0; i < m.size(); ++i) data.push_back(m.data()[i]);
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(data)}};
}

inline Matrix matrix_from_json(const nlohmann::json& j) {
  Matrix m(j.at("rows").get<std::size_t>(), j.at("cols").get<std::size_t>());
  const auto& data = j.at("data");
  if (data.size() != m.size()) throw DataError("matrix_from_json: element count mismatch");
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = data[i];
  return m;
}

inline nlohmann::json model_config_to_json(const ModelConfig& c) {
  return {{"d", c.d},
          {"n_blocks", c.n_blocks},
          {"n_queries", c.n_queries},
          {"points_per_lane", c.points_per_lane},
          {"d_in", c.d_in},
          {"ffn_width", c.ffn_width},
          {"spm_mode", to_string(c.spm_mode)},
          {"cil_mode", to_string(c.cil_mode)},
          {"norm_scheme", to_string(c.norm_scheme)},
          {"tie_mode", to_string(c.tie_mode)},
          {"n_cf_samples", c.n_cf_samples},
          {"node_threshold", c.node_threshold},
          {"edge_threshold", c.edge_threshold},
          {"init_seed", c.init_seed},
          {"spm_epsilon", c.spm.epsilon}};
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.d = j.at("d");
  c.n_blocks = j.at("n_blocks");
  c.n_queries = j.at("n_queries");
  c.points_per_lane = j.at("points_per_lane");
  c.d_in = j.at("d_in");
  c.ffn_width = j.at("ffn_width");
  c.spm_mode = spm_mode_from_string(j.at("spm_mode"));
  c.cil_mode = cil_mode_from_string(j.at("cil_mode"));
  c.norm_scheme = norm_scheme_from_string(j.at("norm_scheme"));
  c.tie_mode = tie_mode_from_string(j.at("tie_mode"));
  c.n_cf_samples = j.at("n_cf_samples");
  c.node_threshold = j.at("node_threshold");
  c.edge_threshold = j.at("edge_threshold");
  c.init_seed = j.at("init_seed");
  c.spm.epsilon = j.at("spm_epsilon");
  return c;
}

// Versioned structured-text checkpoint: config echo plus named parameter
// tensors; doubles round-trip exactly. `extra` is an opaque blob for callers
// (optimizer state, training progress, resolved run config).
inline void save_checkpoint(Model& m, const std::string& path,
                            const nlohmann::json& extra = nlohmann::json::object()) {
  nlohmann::json j;
  j["format_version"] = kCheckpointFormatVersion;
  j["config"] = model_config_to_json(m.config);
  nlohmann::json params = nlohmann::json::object();
  for (Parameter* p : m.parameters()) params[p->name] = matrix_to_json(p->value);
  j["params"] = std::move(params);
  j["extra"] = extra;
  std::ofstream out(path);
  if (!out) throw DataError("cannot open checkpoint for write: " + path);
  out << j.dump() << "\n";
  if (!out) throw DataError("checkpoint write failed: " + path);
}

struct LoadedCheckpoint {
  Model model;
  nlohmann::json extra;
};

inline LoadedCheckpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path + ": bad checkpoint: " + e.what());
  }
  if (!j.contains("format_version") || j["format_version"] != kCheckpointFormatVersion)
    throw DataError(path + ": unsupported checkpoint format_version");
  LoadedCheckpoint out{make_model(model_config_from_json(j.at("config"))),
                       j.value("extra", nlohmann::json::object())};
  const auto& params = j.at("params");
  for (Parameter* p : out.model.parameters()) {
    if (!params.contains(p->name)) throw DataError(path + ": missing parameter " + p->name);
    Matrix v = matrix_from_json(params.at(p->name));
    if (!v.same_shape(p->value)) throw DataError(path + ": shape mismatch for " + p->name);
    p->value = std::move(v);
  }
  return out;
}

}  // namespace t2sg::model
