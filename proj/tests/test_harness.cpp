#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gmg/harness.hpp"
#include "gmg/plots.hpp"

using namespace gmg;
namespace fs = std::filesystem;

namespace {

TrainConfig tiny_run(const std::string& variant = "L") {
  TrainConfig t;
  t.model = ModelConfig::for_variant(variant);
  ModelConfig& c = t.model;
  c.num_layers = 2, c.hidden = 8, c.patch = 2, c.height = c.width = 8, c.t_in = 3, c.t_out = 3, c.att_hidden = 4;
  c.gate_kernel = 3;
  t.lr = 2e-3, t.steps = 6, t.seed = 4;
  return t;
}

SequenceRecord blobs(int n = 8, int size = 8) {
  BlobSpec b;
  b.size = size, b.frames = 6, b.min_sigma = 1.0, b.max_sigma = 2.5, b.max_speed = 0.5;
  return gen_blob_sequences(1, n, b);
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("gmg_test_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string operator/(const std::string& s) const { return (path / s).string(); }
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

bool same_params(const GmgModel<float>& a, const GmgModel<float>& b) {
  if (a.params().count() != b.params().count()) return false;
  for (std::size_t i = 0; i < a.params().count(); ++i)
    if (!(a.params()[i].value == b.params()[i].value)) return false;
  return true;
}

}  // namespace

TEST(Train, LossFallsSteadilyOverTheFirstFiftySteps) {
  TrainConfig cfg = tiny_run();
  cfg.steps = 51;
  const TrainResult r = train(cfg, blobs()).result;
  ASSERT_EQ(r.loss.size(), 51u);
  int down = 0;
  for (std::size_t i = 1; i < r.loss.size(); ++i) down += r.loss[i] < r.loss[i - 1];
  EXPECT_GE(down, 45);
  EXPECT_LT(r.mse.back(), r.mse.front());
}

TEST(Train, ZeroLearningRateLeavesEverythingUnchanged) {
  TrainConfig cfg = tiny_run();
  cfg.lr = 0;
  const auto data = blobs();
  TrainedModel tm = train(cfg, data);
  const auto fresh = make_model(cfg);
  EXPECT_TRUE(same_params(*tm.model, *fresh));
  for (double l : tm.result.loss) EXPECT_EQ(l, tm.result.loss.front());
}

TEST(Train, ResumeMatchesUninterruptedRun) {
  TempDir dir("resume");
  TrainConfig cfg = tiny_run();
  cfg.batch_size = 3, cfg.checkpoint_every = 3;
  const auto data = blobs();
  const TrainedModel full = train(cfg, data, dir / "full");
  ASSERT_TRUE(fs::exists(dir / "full/checkpoint_step3.gmgc"));
  const TrainedModel resumed = resume(dir / "full/checkpoint_step3.gmgc", cfg.steps, data, dir / "resumed");
  EXPECT_EQ(resumed.result.final_step, cfg.steps);
  ASSERT_EQ(resumed.result.loss.size(), 3u);
  for (int i = 0; i < 3; ++i) EXPECT_EQ(resumed.result.loss[i], full.result.loss[3 + i]);
  EXPECT_TRUE(same_params(*full.model, *resumed.model));
  EXPECT_EQ(slurp(dir / "full/checkpoint.gmgc"), slurp(dir / "resumed/checkpoint.gmgc"));
}

TEST(Train, WritesLossCsvAndCheckpoints) {
  TempDir dir("outputs");
  TrainConfig cfg = tiny_run();
  cfg.checkpoint_every = 2;
  const TrainResult r = train(cfg, blobs(), dir.path.string()).result;
  EXPECT_TRUE(fs::exists(dir / "checkpoint_step2.gmgc"));
  EXPECT_TRUE(fs::exists(dir / "checkpoint_step4.gmgc"));
  EXPECT_FALSE(fs::exists(dir / "checkpoint_step6.gmgc"));
  EXPECT_EQ(r.checkpoint, dir / "checkpoint.gmgc");
  const auto mse = read_loss_csv(dir / "loss.csv");
  ASSERT_EQ(mse.size(), r.mse.size());
  for (std::size_t i = 0; i < mse.size(); ++i) EXPECT_NEAR(mse[i], r.mse[i], 1e-6 * r.mse[i]);
}

TEST(Train, RejectsEmptyAndMismatchedData) {
  const TrainConfig cfg = tiny_run();
  EXPECT_THROW(train(cfg, SequenceRecord{}), ValidationError);
  EXPECT_THROW(train(cfg, blobs(2, 16)), ContractError);
  SequenceRecord short_seq = blobs(2);
  short_seq.data = time_slice(short_seq.data, 0, 4);
  EXPECT_THROW(train(cfg, short_seq), ContractError);
  TrainConfig bad = cfg;
  bad.batch_size = 0;
  EXPECT_THROW(train(bad, blobs(2)), ConfigError);
}

TEST(Train, NonFiniteLossNamesTheFirstBadNode) {
  TrainConfig cfg = tiny_run();
  cfg.model.gfm = GfmMode::Off, cfg.model.sam = false, cfg.model.mgm = false;
  auto model = make_model(cfg);
  for (const auto& p : model->params())
    if (p->name.rfind("head.", 0) == 0) p->value.fill(std::numeric_limits<float>::infinity());
  Optimizer opt(cfg.optimizer, cfg.lr);
  opt.bind(model->params());
  try {
    train_loop(cfg, *model, opt, 0, blobs(2), "");
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    EXPECT_NE(std::string(e.what()).find("first: node #"), std::string::npos) << e.what();
  }
}

TEST(Train, BatchIndicesAreSeededDrawsWithoutReplacement) {
  const auto a = harness_detail::batch_indices(3, 7, 10, 4);
  EXPECT_EQ(a, harness_detail::batch_indices(3, 7, 10, 4));
  EXPECT_NE(a, harness_detail::batch_indices(3, 8, 10, 4));
  std::vector<int> sorted = a;
  std::sort(sorted.begin(), sorted.end());
  EXPECT_EQ(std::unique(sorted.begin(), sorted.end()), sorted.end());
  EXPECT_EQ(harness_detail::batch_indices(3, 7, 4, 8), (std::vector<int>{0, 1, 2, 3}));
}

TEST(Checkpoint, RoundTripRestoresModelAndOptimizer) {
  TempDir dir("ckpt");
  TrainConfig cfg = tiny_run();
  cfg.steps = 2;
  const TrainedModel tm = train(cfg, blobs(), dir.path.string());
  const Checkpoint ck = load_checkpoint(tm.result.checkpoint);
  EXPECT_EQ(ck.step, 2);
  EXPECT_EQ(to_json(ck.config), to_json(cfg));
  EXPECT_TRUE(same_params(*ck.model, *tm.model));
  EXPECT_EQ(ck.optimizer.step, 2);
  EXPECT_EQ(ck.optimizer.m.size(), tm.model->params().count());

  const std::string good = slurp(tm.result.checkpoint);
  auto try_bytes = [](const std::string& s) {
    std::istringstream is(s);
    return read_checkpoint(is, "memory");
  };
  std::string bad = good;
  bad[0] = 'X';
  EXPECT_THROW(try_bytes(bad), HeaderError);
  EXPECT_THROW(try_bytes(good.substr(0, good.size() - 5)), TruncationError);
  EXPECT_THROW(load_checkpoint(dir / "missing.gmgc"), IoError);
}

TEST(Config, JsonRoundTripAndUnknownKeys) {
  const TrainConfig cfg = tiny_run("s");
  const nlohmann::json j = to_json(cfg);
  EXPECT_EQ(to_json(train_config_from_json(j)), j);
  nlohmann::json extra = j;
  extra["learning_rate_typo"] = 1;
  EXPECT_THROW(train_config_from_json(extra), ConfigError);
  nlohmann::json bad_model = j;
  bad_model["model"]["hiden"] = 8;
  EXPECT_THROW(train_config_from_json(bad_model), ConfigError);
}

TEST(Evaluate, RepeatsAreIdenticalAndEmptyDataIsRejected) {
  TrainConfig cfg = tiny_run();
  cfg.steps = 2;
  const auto data = blobs(5);
  const TrainedModel tm = train(cfg, data);
  const Evaluation a = evaluate(*tm.model, data, {20, 40}, 2);
  const Evaluation b = evaluate(*tm.model, data, {20, 40}, 2);
  EXPECT_TRUE(a.predictions == b.predictions);
  EXPECT_EQ(to_json(a.report).dump(), to_json(b.report).dump());
  const Evaluation c = evaluate(*tm.model, data, {20, 40}, 3);
  for (std::size_t i = 0; i < a.predictions.size(); ++i) EXPECT_NEAR(a.predictions[i], c.predictions[i], 1e-6);
  EXPECT_EQ(a.predictions.shape(), (Shape{5, 3, 1, 8, 8}));
  EXPECT_EQ(a.report.per_frame.at("csi_20").size(), 3u);
  EXPECT_THROW(evaluate(*tm.model, SequenceRecord{}, {}), ValidationError);
}

TEST(Profile, DoublingHiddenQuadruplesCellParameters) {
  ModelConfig c = tiny_run().model;
  c.hidden = 16;
  const ProfileResult a = profile(c, 0);
  c.hidden = 32;
  const ProfileResult b = profile(c, 0);
  const double ratio = static_cast<double>(b.module_params.at("cell")) / a.module_params.at("cell");
  EXPECT_GT(ratio, 3.5);
  EXPECT_LT(ratio, 4.0);
}

TEST(Profile, CellFlopsMatchConvolutionFormula) {
  ModelConfig c = tiny_run().model;
  c.gfm = GfmMode::Off, c.sam = false, c.mgm = false, c.num_layers = 1;
  const ProfileResult r = profile(c, 0);
  const double hw = c.grid_h() * c.grid_w(), k2 = c.filter_size * c.filter_size, h = c.hidden, cin = c.patch_channels();
  const double convs = k2 * (7 * h * cin + 4 * h * h + 3 * h * h + h * 2 * h) + h * 2 * h;
  EXPECT_NEAR(r.module_flops.at("cell") / (2 * convs * hw), 1.0, 0.15);
}

TEST(Profile, AttentionCostIsRoughlyQuadraticInPositions) {
  ModelConfig c = tiny_run().model;
  c.gfm = GfmMode::Off, c.mgm = false, c.num_layers = 1, c.hidden = 4, c.att_hidden = 2;
  c.height = c.width = 32;
  const double small = profile(c, 0).module_flops.at("sam");
  c.height = c.width = 64;
  const double large = profile(c, 0).module_flops.at("sam");
  // 4x the positions: linear terms give 4x, the attention maps 16x
  EXPECT_GT(large / small, 12.0);
  EXPECT_LE(large / small, 16.0);
}

TEST(Ablation, OneRowPerSpecAndFailuresDoNotStopTheRest) {
  TrainConfig base = tiny_run();
  base.steps = 2;
  const auto data = blobs(4);
  auto specs = standard_ablation();
  const auto rows = run_ablation(specs, base, data, data, {30});
  ASSERT_EQ(rows.size(), specs.size());
  for (const auto& r : rows) EXPECT_TRUE(r.error.empty()) << r.spec.name << ": " << r.error;
  auto find = [&](const std::string& n) {
    return *std::find_if(rows.begin(), rows.end(), [&](const AblationRow& r) { return r.spec.name == n; });
  };
  EXPECT_LT(find("GMG-s").params, find("GMG-L").params);
  EXPECT_LT(find("backbone").params, find("A").params);

  // grid 3x3 cannot host MGM, so only the MGM rows fail
  base.model.height = base.model.width = 6;
  const auto odd = blobs(4, 6);
  const auto mixed = run_ablation({specs[0], specs[1], specs[2]}, base, odd, odd, {});
  ASSERT_EQ(mixed.size(), 3u);
  EXPECT_TRUE(mixed[0].error.empty());
  EXPECT_FALSE(mixed[1].error.empty());
  EXPECT_TRUE(mixed[2].error.empty());
  const nlohmann::json j = to_json(mixed);
  EXPECT_TRUE(j[1].contains("error"));
  EXPECT_TRUE(j[2].contains("metrics"));
}

TEST(Plots, OneReportGivesDeterministicFiles) {
  TempDir dir("plots");
  TrainConfig cfg = tiny_run();
  cfg.steps = 3;
  const auto data = blobs(3);
  const fs::path run = dir.path / "run_a";
  const TrainedModel tm = train(cfg, data, run.string());
  const Evaluation ev = evaluate(*tm.model, data, {30});
  write_json_file(to_json(ev.report), (run / "report.json").string());
  save_sequences({ev.targets, {}}, (run / "predictions.gmgs").string());
  save_sequences({ev.targets, {}}, (run / "targets.gmgs").string());

  const auto files = emit_plots({(run / "report.json").string()}, dir / "plots");
  ASSERT_EQ(files.size(), 3u);
  EXPECT_EQ(files[0], dir / "plots/run_a_loss.svg");
  EXPECT_EQ(files[1], dir / "plots/run_a_per_frame.svg");
  EXPECT_EQ(files[2], dir / "plots/run_a_error_map.pgm");
  const std::string svg = slurp(files[0]);
  EXPECT_EQ(svg.rfind("<svg", 0), 0u);
  EXPECT_EQ(emit_plots({(run / "report.json").string()}, dir / "plots"), files);
  EXPECT_EQ(slurp(files[0]), svg);

  // identical predictions and targets: every tile pixel is black, gutters white
  const std::string pgm = slurp(files[2]);
  const std::string header = "P5\n" + std::to_string(3 * 9 - 1) + " " + std::to_string(3 * 9 - 1) + "\n255\n";
  ASSERT_EQ(pgm.substr(0, header.size()), header);
  for (int y = 0; y < 26; ++y)
    for (int x = 0; x < 26; ++x) {
      const auto v = static_cast<unsigned char>(pgm[header.size() + y * 26 + x]);
      EXPECT_EQ(v, (y % 9 == 8 || x % 9 == 8) ? 255 : 0);
    }
  EXPECT_THROW(emit_plots({dir / "nope/report.json"}, dir / "plots"), IoError);
}

TEST(Plots, ErrorMapPixelsAreAbsoluteDifferences) {
  Rng rng(9);
  const Tensor<float> p = uniform_tensor<float>({2, 3, 1, 5, 4}, rng, 0, 1), t = uniform_tensor<float>({2, 3, 1, 5, 4}, rng, 0, 1);
  int H = 0, W = 0;
  const auto img = error_map_grid(p, t, H, W);
  ASSERT_EQ(H, 11);
  ASSERT_EQ(W, 14);
  for (int n = 0; n < 2; ++n)
    for (int f = 0; f < 3; ++f)
      for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 4; ++x) {
          const std::size_t i = ((n * 3 + f) * 5 + y) * 4 + x;
          const float v = img[(n * 6 + y) * W + f * 5 + x];
          EXPECT_EQ(v, std::abs(p[i] - t[i]));
          EXPECT_LE(std::abs(std::lround(v * 255.0f) / 255.0f - std::abs(p[i] - t[i])), 0.5f / 255.0f + 1e-7f);
        }
}
