// t2sg command line: gen | train | eval | infer | plot
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "t2sg/errors.hpp"
#include "t2sg/eval/pipeline.hpp"
#include "t2sg/gen/dataset_io.hpp"
#include "t2sg/gen/scenario.hpp"
#include "t2sg/model/checkpoint.hpp"
#include "t2sg/train/trainer.hpp"
#include "t2sg/viz/svg_plot.hpp"

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

json default_config() {
  json c;
  c["dataset"] = {{"n_train", 500},
                  {"n_val", 100},
                  {"n_test", 0},
                  {"kinds", {"straight", "t_junction", "crossroad"}},
                  {"multiway_arms", 5},
                  {"lanes_per_arm", 1},
                  {"noise_sigma", 0.15},
                  {"distractor_count", 4},
                  {"bev", {100.0, 100.0}},
                  {"points_per_lane", 11},
                  {"feature_dim", 40},
                  {"feature_seed", 24269},
                  {"ramp_slope", 0.0},
                  {"seed", 5}};
  c["model"] = {{"d", 64},
                {"n_blocks", 2},
                {"n_queries", 24},
                {"points_per_lane", 11},
                {"d_in", 40},
                {"ffn_width", 0},
                {"spm_mode", "add"},
                {"cil_mode", "zero"},
                {"norm_scheme", "post_combined"},
                {"tie_mode", "clamp"},
                {"n_cf_samples", 1},
                {"node_threshold", 0.3},
                {"edge_threshold", 0.5},
                {"init_seed", 1},
                {"spm_epsilon", 1e-6}};
  c["train"] = {{"epochs", 25},
                {"batch_size", 4},
                {"warmup_epochs", 2},
                {"edge_source", "auto"},
                {"lr", 2e-4},
                {"lr_min", 1e-6},
                {"beta1", 0.9},
                {"beta2", 0.999},
                {"eps", 1e-8},
                {"weight_decay", 0.01},
                {"total_steps", 0},
                {"lambda_cls", 1.5},
                {"lambda_reg", 0.02},
                {"focal_alpha", 0.25},
                {"focal_gamma", 2.0},
                {"shuffle_seed", 7},
                {"mask_bg_pairs", true},
                {"eval_every", 0}};
  c["eval"] = {{"thresholds", {1.0, 2.0, 3.0}}};
  return c;
}

// every key in src must already exist in dst; nested objects merge recursively
void merge_validated(json& dst, const json& src, const std::string& prefix) {
  for (const auto& [k, v] : src.items()) {
    if (!dst.contains(k)) throw t2sg::ConfigError("unknown config key: " + prefix + k);
    if (dst[k].is_object() && v.is_object())
      merge_validated(dst[k], v, prefix + k + ".");
    else
      dst[k] = v;
  }
}

json resolve_config(const std::string& path, const std::vector<std::string>& sets) {
  json cfg = default_config();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw t2sg::ConfigError("cannot open config: " + path);
    json file_cfg;
    try {
      in >> file_cfg;
    } catch (const json::exception& e) {
      throw t2sg::ConfigError(path + ": bad json: " + e.what());
    }
    merge_validated(cfg, file_cfg, "");
  }
  for (const std::string& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw t2sg::ConfigError("--set expects key=value: " + kv);
    const std::string key = kv.substr(0, eq);
    const std::string raw = kv.substr(eq + 1);
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::exception&) {
      value = raw;  // bare string
    }
    json* node = &cfg;
    std::istringstream ss(key);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, '.')) parts.push_back(part);
    if (parts.empty()) throw t2sg::ConfigError("--set: empty key");
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
      if (!node->contains(parts[i])) throw t2sg::ConfigError("unknown config key: " + key);
      node = &(*node)[parts[i]];
    }
    if (!node->contains(parts.back())) throw t2sg::ConfigError("unknown config key: " + key);
    (*node)[parts.back()] = value;
  }
  return cfg;
}

t2sg::gen::ScenarioSpec scenario_from(const json& d) {
  t2sg::gen::ScenarioSpec s;
  s.multiway_arms = d.at("multiway_arms");
  s.lanes_per_arm = d.at("lanes_per_arm");
  s.noise_sigma = d.at("noise_sigma");
  s.distractor_count = d.at("distractor_count");
  s.seed = d.at("seed");
  s.x_range = d.at("bev").at(0);
  s.y_range = d.at("bev").at(1);
  s.points_per_lane = d.at("points_per_lane");
  s.ramp_slope = d.at("ramp_slope");
  s.feature_seed = d.at("feature_seed");
  s.feature_dim = d.at("feature_dim");
  return s;
}

t2sg::model::ModelConfig model_from(const json& m) {
  return t2sg::model::model_config_from_json(m);
}

t2sg::train::TrainConfig train_from(const json& t) {
  t2sg::train::TrainConfig c;
  c.epochs = t.at("epochs");
  c.batch_size = t.at("batch_size");
  c.warmup_epochs = t.at("warmup_epochs");
  c.edge_source = t2sg::train::edge_source_from_string(t.at("edge_source"));
  c.optim.lr = t.at("lr");
  c.optim.lr_min = t.at("lr_min");
  c.optim.beta1 = t.at("beta1");
  c.optim.beta2 = t.at("beta2");
  c.optim.eps = t.at("eps");
  c.optim.weight_decay = t.at("weight_decay");
  c.optim.total_steps = t.at("total_steps");
  c.weights.lambda_cls = t.at("lambda_cls");
  c.weights.lambda_reg = t.at("lambda_reg");
  c.weights.focal_alpha = t.at("focal_alpha");
  c.weights.focal_gamma = t.at("focal_gamma");
  c.shuffle_seed = t.at("shuffle_seed");
  c.mask_bg_pairs = t.at("mask_bg_pairs");
  return c;
}

std::vector<double> thresholds_from(const json& cfg) {
  return cfg.at("eval").at("thresholds").get<std::vector<double>>();
}

void write_text(const std::string& path, const std::string& content) {
  std::ofstream out(path);
  if (!out) throw t2sg::DataError("cannot open for write: " + path);
  out << content;
  if (!out) throw t2sg::DataError("write failed: " + path);
}

std::string fmt_threshold(double t) {
  std::ostringstream ss;
  ss << t;
  return ss.str();
}

json report_to_json(const t2sg::eval::EvalReport& rep) {
  json j;
  for (const auto& [t, v] : rep.ap) j["ap"][fmt_threshold(t)] = v;
  for (const auto& [t, v] : rep.map_per_class) j["map"][fmt_threshold(t)] = v;
  for (const auto& [t, v] : rep.a_at_1) j["a_at_1"][fmt_threshold(t)] = v;
  j["det_l"] = rep.det_l;
  j["det_t"] = rep.det_t;
  j["top_ll"] = rep.top_ll;
  j["top_lt"] = rep.top_lt;
  j["ols"] = rep.ols_score;
  j["top_ll_defined"] = rep.top_ll_defined;
  j["top_lt_defined"] = rep.top_lt_defined;
  return j;
}

void print_report(const t2sg::eval::EvalReport& rep) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(3);
  out << std::setw(8) << "thr";
  for (const auto& [t, v] : rep.ap) out << std::setw(8) << fmt_threshold(t);
  out << "\n" << std::setw(8) << "AP";
  for (const auto& [t, v] : rep.ap) out << std::setw(8) << v;
  out << "\n" << std::setw(8) << "mAP";
  for (const auto& [t, v] : rep.map_per_class) out << std::setw(8) << v;
  out << "\n" << std::setw(8) << "A@1";
  for (const auto& [t, v] : rep.a_at_1) out << std::setw(8) << v;
  out << "\n\n";
  out << std::setw(8) << "DET_l" << std::setw(8) << "DET_t" << std::setw(8) << "TOP_ll"
      << std::setw(8) << "TOP_lt" << std::setw(8) << "OLS" << "\n";
  out << std::setw(8) << rep.det_l << std::setw(8) << rep.det_t << std::setw(8) << rep.top_ll
      << std::setw(8) << rep.top_lt << std::setw(8) << rep.ols_score << "\n";
  if (!rep.top_ll_defined) out << "note: TOP_ll undefined (no GT lane has a successor)\n";
  if (!rep.top_lt_defined) out << "note: TOP_lt undefined (no GT lane-element pair)\n";
  std::cout << out.str();
}

// deterministic worker pool: results land in index order regardless of jobs
template <typename Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn&& fn) {
  if (jobs <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::size_t chunk = (n + jobs - 1) / jobs;
  for (unsigned w = 0; w < jobs; ++w) {
    const std::size_t lo = w * chunk, hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

int cmd_gen(const json& cfg, const std::string& out_dir, unsigned jobs) {
  const json& d = cfg.at("dataset");
  const auto kinds = d.at("kinds").get<std::vector<std::string>>();
  if (kinds.empty()) throw t2sg::ConfigError("dataset.kinds must be non-empty");
  const std::uint64_t base_seed = d.at("seed");
  fs::create_directories(out_dir);

  const std::vector<std::pair<std::string, int>> splits = {
      {"train", d.at("n_train")}, {"val", d.at("n_val")}, {"test", d.at("n_test")}};
  for (std::size_t si = 0; si < splits.size(); ++si) {
    const auto& [name, count] = splits[si];
    if (count <= 0) continue;
    const std::uint64_t split_seed = t2sg::num::derive_seed(base_seed, si);
    std::vector<t2sg::gen::DetectionSample> samples(count);
    parallel_for(count, jobs, [&](std::size_t i) {
      t2sg::gen::ScenarioSpec spec = scenario_from(d);
      spec.kind = t2sg::gen::scenario_kind_from_string(kinds[i % kinds.size()]);
      spec.seed = t2sg::num::derive_seed(split_seed, i);
      const auto scene = t2sg::gen::generate_scene(spec);
      samples[i] = t2sg::gen::perturb_detections(scene, spec, static_cast<int>(i));
    });
    json echo = cfg;
    echo["split"] = name;
    t2sg::gen::write_dataset(samples, out_dir + "/" + name + ".jsonl", echo);
    std::cout << "wrote " << count << " scenes to " << out_dir << "/" << name << ".jsonl\n";
  }
  write_text(out_dir + "/resolved_config.json", cfg.dump(2) + "\n");
  return 0;
}

json optim_state_to_json(const t2sg::train::AdamW& opt, t2sg::model::Model& m) {
  json j;
  j["step"] = opt.step_count();
  auto params = m.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) {
    j["m"][params[i]->name] = t2sg::model::matrix_to_json(opt.first_moments()[i]);
    j["v"][params[i]->name] = t2sg::model::matrix_to_json(opt.second_moments()[i]);
  }
  return j;
}

void optim_state_from_json(const json& j, t2sg::train::AdamW& opt, t2sg::model::Model& m) {
  std::vector<t2sg::num::Matrix> ms, vs;
  for (t2sg::num::Parameter* p : m.parameters()) {
    ms.push_back(t2sg::model::matrix_from_json(j.at("m").at(p->name)));
    vs.push_back(t2sg::model::matrix_from_json(j.at("v").at(p->name)));
  }
  opt.restore(j.at("step").get<std::size_t>(), std::move(ms), std::move(vs));
}

int cmd_train(const json& cfg, const std::string& data_dir, const std::string& out_dir,
              const std::string& resume) {
  auto data = t2sg::gen::read_dataset(data_dir + "/train.jsonl");
  if (data.empty()) throw t2sg::DataError("empty training split");
  std::vector<t2sg::gen::DetectionSample> val;
  const std::size_t eval_every = cfg.at("train").at("eval_every");
  if (eval_every > 0 && fs::exists(data_dir + "/val.jsonl"))
    val = t2sg::gen::read_dataset(data_dir + "/val.jsonl");

  t2sg::train::TrainConfig tc = train_from(cfg.at("train"));
  const auto thresholds = thresholds_from(cfg);
  fs::create_directories(out_dir);

  t2sg::model::Model model = t2sg::model::make_model(model_from(cfg.at("model")));
  std::size_t start_epoch = 0;
  if (tc.optim.total_steps == 0)
    tc.optim.total_steps =
        tc.epochs * t2sg::train::steps_per_epoch(data.size(), tc.batch_size);
  t2sg::train::AdamW opt(model.parameters(), tc.optim);

  if (!resume.empty()) {
    auto ckpt = t2sg::model::load_checkpoint(resume);
    model = std::move(ckpt.model);
    opt = t2sg::train::AdamW(model.parameters(), tc.optim);
    if (!ckpt.extra.contains("optim"))
      throw t2sg::DataError(resume + ": checkpoint has no optimizer state; cannot resume");
    optim_state_from_json(ckpt.extra.at("optim"), opt, model);
    start_epoch = ckpt.extra.at("epochs_completed");
    std::cout << "resumed from " << resume << " at epoch " << start_epoch << ", step "
              << opt.step_count() << "\n";
  }

  std::ofstream log(out_dir + "/metrics.jsonl", resume.empty() ? std::ios::trunc : std::ios::app);
  if (!log) throw t2sg::DataError("cannot open metrics log");

  t2sg::train::train(model, data, tc, opt, start_epoch,
                     [&](const t2sg::train::EpochLog& el) {
                       json line{{"epoch", el.epoch},
                                 {"step", el.step},
                                 {"l_v", el.l_v},
                                 {"l_e", el.l_e},
                                 {"lr", el.lr}};
                       if (eval_every > 0 && !val.empty() && (el.epoch + 1) % eval_every == 0) {
                         auto rep = t2sg::eval::evaluate_model(model, val, thresholds);
                         line["val"] = report_to_json(rep);
                       }
                       log << line.dump() << "\n";
                       log.flush();
                       std::cout << "epoch " << el.epoch << " l_v=" << el.l_v << " l_e=" << el.l_e
                                 << " lr=" << el.lr << "\n";
                     });

  json extra;
  extra["epochs_completed"] = tc.epochs;
  extra["optim"] = optim_state_to_json(opt, model);
  extra["resolved_config"] = cfg;
  t2sg::model::save_checkpoint(model, out_dir + "/checkpoint.json", extra);
  write_text(out_dir + "/resolved_config.json", cfg.dump(2) + "\n");
  std::cout << "checkpoint written to " << out_dir << "/checkpoint.json\n";
  return 0;
}

int cmd_eval(const json& cfg, const std::string& checkpoint, const std::string& data_file,
             const std::string& out_dir, unsigned jobs) {
  auto ckpt = t2sg::model::load_checkpoint(checkpoint);
  auto samples = t2sg::gen::read_dataset(data_file);
  if (samples.empty()) throw t2sg::DataError("empty dataset: " + data_file);
  const auto thresholds = thresholds_from(cfg);

  std::vector<t2sg::eval::ScenePred> preds(samples.size());
  std::vector<t2sg::eval::SceneGt> gts(samples.size());
  parallel_for(samples.size(), jobs, [&](std::size_t i) {
    // frozen model, parallel inference over scenes
    preds[i] = t2sg::eval::to_scene_pred(t2sg::model::predict(ckpt.model, samples[i]));
    gts[i] = t2sg::eval::to_scene_gt(samples[i]);
  });
  const auto rep =
      t2sg::eval::evaluate_scenes(preds, gts, ckpt.model.config.edge_threshold, thresholds);

  fs::create_directories(out_dir);
  json out = report_to_json(rep);
  out["config"] = cfg;
  out["checkpoint"] = checkpoint;
  out["dataset"] = data_file;
  write_text(out_dir + "/report.json", out.dump(2) + "\n");
  print_report(rep);
  return 0;
}

json graph_to_json(const t2sg::scene::SceneGraph& g) {
  json lanes = json::array();
  for (const auto& lane : g.lanes) {
    json pts = json::array();
    for (const auto& p : lane.centerline.points) pts.push_back({p.x, p.y, p.z});
    lanes.push_back({{"category", t2sg::scene::to_string(lane.category)}, {"points", pts}});
  }
  json edges = json::array();
  for (const auto& e : g.edges) edges.push_back({e.first, e.second});
  return {{"lanes", lanes}, {"edges", edges}};
}

t2sg::scene::SceneGraph graph_from_json(const json& j) {
  t2sg::scene::SceneGraph g;
  for (const auto& lane : j.at("lanes")) {
    t2sg::scene::Lane l;
    l.category = t2sg::scene::lane_category_from_string(lane.at("category"));
    for (const auto& p : lane.at("points")) l.centerline.points.push_back({p[0], p[1], p[2]});
    g.lanes.push_back(std::move(l));
  }
  for (const auto& e : j.at("edges"))
    g.edges.insert({e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>()});
  return g;
}

int cmd_infer(const json& cfg, const std::string& checkpoint, const std::string& data_file,
              std::size_t index, const std::string& out_file) {
  auto ckpt = t2sg::model::load_checkpoint(checkpoint);
  auto samples = t2sg::gen::read_dataset(data_file);
  if (index >= samples.size())
    throw t2sg::DataError("scene index " + std::to_string(index) + " out of range (" +
                          std::to_string(samples.size()) + " scenes)");
  const auto graph =
      t2sg::model::infer(ckpt.model, samples[index], ckpt.model.config.edge_threshold);
  const auto violations = t2sg::scene::validate(graph);
  if (!violations.empty())
    throw t2sg::NumericError("inferred graph failed validation: " + violations.front());
  json out = graph_to_json(graph);
  out["config"] = cfg;
  out["scene_id"] = samples[index].scene_id;
  write_text(out_file, out.dump(2) + "\n");
  std::cout << "wrote " << graph.lanes.size() << " lanes, " << graph.edges.size() << " edges to "
            << out_file << "\n";
  return 0;
}

int cmd_plot(const json& cfg, const std::string& graph_file, const std::string& data_file,
             std::size_t index, const std::string& out_file) {
  t2sg::scene::SceneGraph gt, pred;
  bool have_gt = false, have_pred = false;
  if (!data_file.empty()) {
    auto samples = t2sg::gen::read_dataset(data_file);
    if (index >= samples.size()) throw t2sg::DataError("scene index out of range");
    gt = samples[index].scene;
    have_gt = true;
  }
  if (!graph_file.empty()) {
    std::ifstream in(graph_file);
    if (!in) throw t2sg::DataError("cannot open: " + graph_file);
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw t2sg::DataError(graph_file + ": bad graph json: " + e.what());
    }
    pred = graph_from_json(j);
    have_pred = true;
  }
  if (!have_gt && !have_pred)
    throw t2sg::ConfigError("plot: need --graph and/or --data/--index");
  std::string svg;
  if (have_gt && have_pred)
    svg = t2sg::viz::comparison_svg(pred, gt);
  else
    svg = t2sg::viz::scene_to_svg(have_pred ? pred : gt);
  // provenance: resolved config rides along as a comment
  svg += "<!-- config " + cfg.dump() + " -->\n";
  t2sg::viz::write_svg(out_file, svg);
  std::cout << "wrote " << out_file << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"traffic topology scene graphs: generate, train, evaluate, infer, plot"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out", data_path, checkpoint, resume, graph_file;
  std::string infer_out = "graph.json", plot_out = "scene.svg";
  std::vector<std::string> sets;
  std::uint64_t seed = 0;
  bool seed_given = false;
  unsigned jobs = 1;
  std::size_t index = 0;

  app.add_option("--config", config_path, "config file (json)");
  app.add_option("--set", sets, "override config key, e.g. --set train.epochs=10");
  auto* seed_opt = app.add_option("--seed", seed, "override dataset/model seeds");
  app.add_option("--jobs", jobs, "worker threads for gen/eval");

  auto* gen = app.add_subcommand("gen", "generate dataset splits");
  gen->add_option("--out", out_dir, "output directory");

  auto* train = app.add_subcommand("train", "train a model");
  train->add_option("--data", data_path, "dataset directory (train.jsonl[, val.jsonl])")
      ->required();
  train->add_option("--out", out_dir, "output directory");
  train->add_option("--resume", resume, "checkpoint to resume from");

  auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
  eval->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  eval->add_option("--data", data_path, "dataset file (jsonl)")->required();
  eval->add_option("--out", out_dir, "output directory");

  auto* infer = app.add_subcommand("infer", "infer one scene graph");
  infer->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  infer->add_option("--data", data_path, "dataset file (jsonl)")->required();
  infer->add_option("--index", index, "scene index");
  infer->add_option("--out", infer_out, "output graph file");

  auto* plot = app.add_subcommand("plot", "render a scene or prediction as svg");
  plot->add_option("--graph", graph_file, "graph json (e.g. from infer)");
  plot->add_option("--data", data_path, "dataset file (jsonl), plots GT scene");
  plot->add_option("--index", index, "scene index");
  plot->add_option("--out", plot_out, "output svg file");

  try {
    app.parse(argc, argv);
    seed_given = seed_opt->count() > 0;
    json cfg = resolve_config(config_path, sets);
    if (seed_given) {
      cfg["dataset"]["seed"] = seed;
      cfg["model"]["init_seed"] = seed;
      cfg["train"]["shuffle_seed"] = seed ^ 0x517ULL;
    }
    if (gen->parsed()) return cmd_gen(cfg, out_dir, jobs);
    if (train->parsed()) return cmd_train(cfg, data_path, out_dir, resume);
    if (eval->parsed()) return cmd_eval(cfg, checkpoint, data_path, out_dir, jobs);
    if (infer->parsed()) return cmd_infer(cfg, checkpoint, data_path, index, infer_out);
    if (plot->parsed()) return cmd_plot(cfg, graph_file, data_path, index, plot_out);
    return 0;
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const t2sg::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const t2sg::num::dim_error& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const t2sg::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const t2sg::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
