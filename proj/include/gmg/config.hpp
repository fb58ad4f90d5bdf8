#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "gmg/model.hpp"
#include "gmg/optimizer.hpp"

namespace gmg {

struct TrainConfig {
  ModelConfig model;
  double lr = 3e-4;
  int batch_size = 8;
  int steps = 2000;
  std::uint64_t seed = 0;
  OptimizerKind optimizer = OptimizerKind::Adam;
  int checkpoint_every = 0;  // 0: only the final checkpoint
  int log_every = 1;
  double clip_norm = 0.0;    // 0: no clipping
  bool teacher_forcing = false;
  double teacher_start = 1.0;  // probability at step 0, decaying linearly
  int teacher_decay_steps = 1000;

  /// Teacher-forcing probability in effect at optimizer step `step`.
  double teacher_prob(int step) const {
    if (!teacher_forcing || teacher_decay_steps <= 0) return 0.0;
    return std::max(0.0, teacher_start * (1.0 - static_cast<double>(step) / teacher_decay_steps));
  }

  void validate() const {
    model.validate();
    if (!(lr >= 0.0)) throw ConfigError("learning rate must be >= 0");
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (steps < 0) throw ConfigError("steps must be >= 0");
    if (clip_norm < 0) throw ConfigError("clip_norm must be >= 0");
  }
};

inline nlohmann::json to_json(const ModelConfig& c) {
  return {{"variant", c.variant},    {"gfm", to_string(c.gfm)},   {"sam", c.sam},
          {"mgm", c.mgm},            {"ghu", c.ghu},              {"num_layers", c.num_layers},
          {"hidden", c.hidden},      {"patch", c.patch},          {"gate_kernel", c.gate_kernel},
          {"filter_size", c.filter_size}, {"att_hidden", c.att_hidden}, {"channels", c.channels},
          {"height", c.height},      {"width", c.width},          {"t_in", c.t_in},
          {"t_out", c.t_out}};
}

/// Unknown keys are rejected so typos do not silently fall back to defaults.
/// A "variant" key sets the module toggles first; explicit toggles then override it.
inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  static const char* known[] = {"variant", "gfm", "sam", "mgm", "ghu", "num_layers", "hidden", "patch", "gate_kernel",
                                "filter_size", "att_hidden", "channels", "height", "width", "t_in", "t_out"};
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* n : known) ok = ok || k == n;
    if (!ok) throw ConfigError("unknown model config key '" + k + "'");
  }
  try {
    if (j.contains("variant")) c.apply_variant(j.at("variant").get<std::string>());
    if (j.contains("gfm")) c.gfm = parse_gfm_mode(j.at("gfm").get<std::string>());
    c.sam = j.value("sam", c.sam);
    c.mgm = j.value("mgm", c.mgm);
    c.ghu = j.value("ghu", c.ghu);
    c.num_layers = j.value("num_layers", c.num_layers);
    c.hidden = j.value("hidden", c.hidden);
    c.patch = j.value("patch", c.patch);
    c.gate_kernel = j.value("gate_kernel", c.gate_kernel);
    c.filter_size = j.value("filter_size", c.filter_size);
    c.att_hidden = j.value("att_hidden", c.att_hidden);
    c.channels = j.value("channels", c.channels);
    c.height = j.value("height", c.height);
    c.width = j.value("width", c.width);
    c.t_in = j.value("t_in", c.t_in);
    c.t_out = j.value("t_out", c.t_out);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("model config: ") + e.what());
  }
  return c;
}

inline nlohmann::json to_json(const TrainConfig& t) {
  return {{"model", to_json(t.model)},
          {"lr", t.lr},
          {"batch_size", t.batch_size},
          {"steps", t.steps},
          {"seed", t.seed},
          {"optimizer", to_string(t.optimizer)},
          {"checkpoint_every", t.checkpoint_every},
          {"log_every", t.log_every},
          {"clip_norm", t.clip_norm},
          {"teacher_forcing", t.teacher_forcing},
          {"teacher_start", t.teacher_start},
          {"teacher_decay_steps", t.teacher_decay_steps}};
}

inline TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig t;
  static const char* known[] = {"model", "lr", "batch_size", "steps", "seed", "optimizer", "checkpoint_every",
                                "log_every", "clip_norm", "teacher_forcing", "teacher_start", "teacher_decay_steps"};
  for (const auto& [k, v] : j.items()) {
    bool ok = false;
    for (const char* n : known) ok = ok || k == n;
    if (!ok) throw ConfigError("unknown train config key '" + k + "'");
  }
  try {
    if (j.contains("model")) t.model = model_config_from_json(j.at("model"));
    t.lr = j.value("lr", t.lr);
    t.batch_size = j.value("batch_size", t.batch_size);
    t.steps = j.value("steps", t.steps);
    t.seed = j.value("seed", t.seed);
    if (j.contains("optimizer")) t.optimizer = parse_optimizer(j.at("optimizer").get<std::string>());
    t.checkpoint_every = j.value("checkpoint_every", t.checkpoint_every);
    t.log_every = j.value("log_every", t.log_every);
    t.clip_norm = j.value("clip_norm", t.clip_norm);
    t.teacher_forcing = j.value("teacher_forcing", t.teacher_forcing);
    t.teacher_start = j.value("teacher_start", t.teacher_start);
    t.teacher_decay_steps = j.value("teacher_decay_steps", t.teacher_decay_steps);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("train config: ") + e.what());
  }
  return t;
}

inline nlohmann::json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return nlohmann::json::parse(in, nullptr, true, true);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline void write_json_file(const nlohmann::json& j, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out << j.dump(2) << "\n";
  if (!out) throw IoError("write failed for " + path);
}

}  // namespace gmg
