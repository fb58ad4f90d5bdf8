#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "gmg/checkpoint.hpp"
#include "gmg/datasets.hpp"
#include "gmg/metrics.hpp"
#include "gmg/sequence_io.hpp"

namespace gmg {

struct TrainResult {
  std::vector<double> loss;  // sum of squared errors per optimizer step
  std::vector<double> mse;   // same, per pixel
  int final_step = 0;
  std::string checkpoint;    // empty when no output directory was given
  double seconds = 0.0;
};

namespace harness_detail {

inline void check_dataset(const ModelConfig& c, const SequenceRecord& data, int frames_needed) {
  if (data.data.rank() != 5 || data.data.size() == 0) throw ValidationError("dataset is empty");
  const Shape& s = data.data.shape();
  if (s[2] != c.channels || s[3] != c.height || s[4] != c.width)
    throw ContractError("dataset frames " + std::to_string(s[2]) + "x" + std::to_string(s[3]) + "x" + std::to_string(s[4]) +
                        " do not match model config " + std::to_string(c.channels) + "x" + std::to_string(c.height) + "x" +
                        std::to_string(c.width));
  if (s[1] < frames_needed)
    throw ContractError("dataset has " + std::to_string(s[1]) + " frames per sequence, need " + std::to_string(frames_needed));
}

/// Sample indices for optimizer step `step`: every sample in order when the batch covers
/// the dataset, otherwise a draw without replacement seeded by (seed, step).
inline std::vector<int> batch_indices(std::uint64_t seed, int step, int n, int batch) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  if (batch >= n) return idx;
  Rng rng(seed * 0x100000001B3ull + static_cast<std::uint64_t>(step) + 1);
  for (int i = 0; i < batch; ++i) std::swap(idx[i], idx[rng.uniform_int(i, n - 1)]);
  idx.resize(static_cast<std::size_t>(batch));
  return idx;
}

inline Tensor<float> gather(const Tensor<float>& x, const std::vector<int>& idx) {
  std::vector<Tensor<float>> parts;
  for (int i : idx) parts.push_back(batch_slice(x, i, i + 1));
  return batch_concat(parts);
}

}  // namespace harness_detail

/// Runs optimizer steps [start_step, cfg.steps) on `model`. Writes loss.csv and
/// checkpoints into `out_dir` when it is non-empty.
inline TrainResult train_loop(const TrainConfig& cfg, GmgModel<float>& model, Optimizer& opt, int start_step,
                              const SequenceRecord& data, const std::string& out_dir, std::ostream* log = nullptr) {
  const ModelConfig& mc = model.config();
  const int T_in = mc.t_in, T_out = mc.t_out;
  harness_detail::check_dataset(mc, data, T_in + T_out);
  const Tensor<float> patched = patchify(time_slice(data.data, 0, T_in + T_out), mc.patch);

  namespace fs = std::filesystem;
  std::ofstream csv;
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    csv.open(fs::path(out_dir) / "loss.csv", start_step == 0 ? std::ios::trunc : std::ios::app);
    if (!csv) throw IoError("cannot write " + (fs::path(out_dir) / "loss.csv").string());
    if (start_step == 0) csv << "step,loss,mse\n";
    csv.precision(9);
  }

  TrainResult res;
  const auto t0 = std::chrono::steady_clock::now();
  auto save = [&](const std::string& name, int step) {
    const std::string path = (fs::path(out_dir) / name).string();
    save_checkpoint(path, cfg, step, model, opt.state());
    return path;
  };

  for (int step = start_step; step < cfg.steps; ++step) {
    const auto idx = harness_detail::batch_indices(cfg.seed, step, patched.dim(0), cfg.batch_size);
    const Tensor<float> batch = harness_detail::gather(patched, idx);
    Rng tf_rng(cfg.seed ^ (0xA5A5A5A5ull + static_cast<std::uint64_t>(step) * 0x9E3779B97F4A7C15ull));
    RolloutOptions ro{cfg.teacher_prob(step), &tf_rng};

    model.params().zero_grad();
    Graph<float> g;
    const std::vector<Var<float>> preds = model.rollout(g, batch, ro);
    std::vector<Var<float>> terms;
    for (int t = 0; t < T_out; ++t) terms.push_back(ops::sum_squared_error(preds[t], frame_at(batch, T_in + t)));
    const Var<float> loss = ops::add_scalars(terms);
    const double L = loss.value()[0];
    if (!std::isfinite(L)) {
      const std::string where = g.first_non_finite();
      throw NumericError("loss became non-finite at step " + std::to_string(step) + (where.empty() ? "" : "; first: " + where));
    }
    g.backward(loss);
    for (const auto& p : model.params())
      if (!p->grad.all_finite()) throw NumericError("non-finite gradient in " + p->name + " at step " + std::to_string(step));
    if (cfg.clip_norm > 0) Optimizer::clip_grad_norm(model.params(), cfg.clip_norm);
    opt.step(model.params());

    const double count = static_cast<double>(batch.size()) * T_out / (T_in + T_out);
    res.loss.push_back(L);
    res.mse.push_back(L / count);
    if (csv.is_open()) csv << step << "," << L << "," << L / count << "\n";
    if (log && cfg.log_every > 0 && (step % cfg.log_every == 0 || step + 1 == cfg.steps))
      *log << "step " << step << " loss " << L << " mse " << L / count << "\n";
    if (!out_dir.empty() && cfg.checkpoint_every > 0 && (step + 1) % cfg.checkpoint_every == 0 && step + 1 < cfg.steps)
      save("checkpoint_step" + std::to_string(step + 1) + ".gmgc", step + 1);
  }
  res.final_step = std::max(start_step, cfg.steps);
  if (!out_dir.empty()) res.checkpoint = save("checkpoint.gmgc", res.final_step);
  res.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return res;
}

inline std::unique_ptr<GmgModel<float>> make_model(const TrainConfig& cfg) {
  cfg.validate();
  auto model = std::make_unique<GmgModel<float>>(cfg.model);
  Rng rng(cfg.seed);
  model->init(rng);
  return model;
}

struct TrainedModel {
  std::unique_ptr<GmgModel<float>> model;
  TrainResult result;
};

inline TrainedModel train(const TrainConfig& cfg, const SequenceRecord& data, const std::string& out_dir = "",
                          std::ostream* log = nullptr) {
  TrainedModel tm{make_model(cfg), {}};
  Optimizer opt(cfg.optimizer, cfg.lr);
  opt.bind(tm.model->params());
  tm.result = train_loop(cfg, *tm.model, opt, 0, data, out_dir, log);
  return tm;
}

/// Continues a run from a checkpoint up to `steps` total optimizer steps.
inline TrainedModel resume(const std::string& checkpoint, int steps, const SequenceRecord& data, const std::string& out_dir = "",
                           std::ostream* log = nullptr) {
  Checkpoint ck = load_checkpoint(checkpoint);
  TrainConfig cfg = ck.config;
  cfg.steps = steps;
  Optimizer opt(cfg.optimizer, cfg.lr);
  opt.bind(ck.model->params());
  if (!ck.optimizer.m.empty()) opt.state() = ck.optimizer;
  opt.state().step = ck.optimizer.step;
  TrainedModel tm{std::move(ck.model), {}};
  tm.result = train_loop(cfg, *tm.model, opt, ck.step, data, out_dir, log);
  return tm;
}

struct Evaluation {
  MetricReport report;
  Tensor<float> predictions;  // N x t_out x C x H x W, clamped
  Tensor<float> targets;
};

/// Forecasts every sequence from its first t_in frames and scores frames t_in .. t_in + t_out - 1.
/// Thresholds are in data units; the record's "scale" metadata maps stored values to them.
inline Evaluation evaluate(const GmgModel<float>& model, const SequenceRecord& data, const std::vector<double>& thresholds,
                           int batch_size = 8) {
  const ModelConfig& mc = model.config();
  if (data.data.rank() != 5 || data.data.size() == 0) throw ValidationError("evaluate: empty dataset");
  harness_detail::check_dataset(mc, data, mc.t_in + mc.t_out);
  const int N = data.count();
  std::vector<Tensor<float>> outs;
  for (int b0 = 0; b0 < N; b0 += batch_size) {
    const int b1 = std::min(N, b0 + batch_size);
    outs.push_back(model.forward_sequence(time_slice(batch_slice(data.data, b0, b1), 0, mc.t_in)));
  }
  Evaluation ev;
  ev.predictions = batch_concat(outs);
  ev.targets = time_slice(data.data, mc.t_in, mc.t_in + mc.t_out);
  ev.report = compute_report(ev.predictions, ev.targets, thresholds, data.scale());
  return ev;
}

// ----------------------------------------------------------------- profile

struct ProfileResult {
  std::size_t params = 0;
  std::map<std::string, std::size_t> module_params;  // cell, gfm, sam, mgm, ghu, head
  double flops = 0.0;                                // per forward time step, 2 x multiply-adds
  std::map<std::string, double> module_flops;
  double fps = 0.0;                                  // full sequences per second on this host
};

inline nlohmann::json to_json(const ProfileResult& p) {
  return {{"params", p.params}, {"module_params", p.module_params}, {"flops_per_step", p.flops},
          {"module_flops", p.module_flops}, {"sequences_per_second", p.fps}};
}

/// Exact parameter counts, FLOPs of one forward time step at batch 1, and measured
/// throughput over `timing_reps` full forecasts (0 skips timing).
inline ProfileResult profile(const ModelConfig& cfg, int timing_reps = 1, std::uint64_t seed = 0) {
  GmgModel<float> model(cfg);
  Rng rng(seed);
  model.init(rng);
  ProfileResult r;
  r.params = model.params().total_size();
  for (const char* m : {"cell", "gfm", "sam", "mgm", "ghu", "head"}) r.module_params[m] = model.params().size_matching(m);

  Graph<float> g;
  g.set_track_params(false);
  StackState<float> s = model.initial_state(g, 1);
  model.step(g, s, g.constant(Tensor<float>({1, cfg.patch_channels(), cfg.grid_h(), cfg.grid_w()})), 1);
  for (const auto& [scope, f] : g.flops()) {
    r.flops += f;
    r.module_flops[scope.empty() ? "head" : scope] += f;
  }

  if (timing_reps > 0) {
    const Tensor<float> x({1, cfg.t_in, cfg.channels, cfg.height, cfg.width});
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < timing_reps; ++i) (void)model.forward_sequence(x);
    const double sec = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    r.fps = sec > 0 ? timing_reps / sec : 0.0;
  }
  return r;
}

// ---------------------------------------------------------------- ablation

struct AblationSpec {
  std::string name;
  GfmMode gfm = GfmMode::Off;
  bool sam = false;
  bool mgm = false;

  void apply(ModelConfig& c) const {
    c.variant = name;
    c.gfm = gfm;
    c.sam = sam;
    c.mgm = mgm;
  }
};

/// Backbone, single-module rows (A)-(D), then the three variants.
inline std::vector<AblationSpec> standard_ablation() {
  return {{"backbone", GfmMode::Off, false, false}, {"A", GfmMode::Off, false, true},     {"B", GfmMode::Off, true, false},
          {"C", GfmMode::Full, false, false},      {"D", GfmMode::Full, true, false},     {"GMG-s", GfmMode::Simple, true, true},
          {"GMG-m", GfmMode::Full, false, true},   {"GMG-L", GfmMode::Full, true, true}};
}

inline nlohmann::json to_json(const AblationSpec& s) {
  return {{"name", s.name}, {"gfm", to_string(s.gfm)}, {"sam", s.sam}, {"mgm", s.mgm}};
}

inline AblationSpec ablation_spec_from_json(const nlohmann::json& j) {
  AblationSpec s;
  s.name = j.at("name");
  s.gfm = parse_gfm_mode(j.value("gfm", std::string("off")));
  s.sam = j.value("sam", false);
  s.mgm = j.value("mgm", false);
  return s;
}

struct AblationRow {
  AblationSpec spec;
  std::size_t params = 0;
  double flops = 0.0;
  double fps = 0.0;
  double final_train_mse = 0.0;
  MetricReport report;
  std::string error;  // non-empty when the row failed
};

/// Trains and evaluates every spec under the same seed and budget. A failing row
/// records its error and the remaining rows still run.
inline std::vector<AblationRow> run_ablation(const std::vector<AblationSpec>& specs, const TrainConfig& base,
                                             const SequenceRecord& train_data, const SequenceRecord& eval_data,
                                             const std::vector<double>& thresholds, const std::string& out_dir = "",
                                             std::ostream* log = nullptr) {
  std::vector<AblationRow> rows;
  for (const auto& spec : specs) {
    AblationRow row;
    row.spec = spec;
    try {
      TrainConfig cfg = base;
      spec.apply(cfg.model);
      const ProfileResult pr = profile(cfg.model, 1, cfg.seed);
      row.params = pr.params, row.flops = pr.flops, row.fps = pr.fps;
      if (log) *log << "[" << spec.name << "] params " << pr.params << "\n";
      const std::string dir = out_dir.empty() ? "" : (std::filesystem::path(out_dir) / spec.name).string();
      TrainedModel tm = train(cfg, train_data, dir, log);
      row.final_train_mse = tm.result.mse.empty() ? 0.0 : tm.result.mse.back();
      row.report = evaluate(*tm.model, eval_data, thresholds).report;
    } catch (const std::exception& e) {
      row.error = e.what();
      if (log) *log << "[" << spec.name << "] failed: " << e.what() << "\n";
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

inline nlohmann::json to_json(const std::vector<AblationRow>& rows) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::json j = to_json(r.spec);
    j["params"] = r.params;
    j["flops"] = r.flops;
    j["fps"] = r.fps;
    if (!r.error.empty()) {
      j["error"] = r.error;
    } else {
      j["final_train_mse"] = r.final_train_mse;
      j["metrics"] = to_json(r.report);
    }
    arr.push_back(j);
  }
  return arr;
}

}  // namespace gmg
