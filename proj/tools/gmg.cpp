#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "gmg/gmg.hpp"

namespace fs = std::filesystem;
using namespace gmg;

namespace {

enum Exit { kOk = 0, kUsage = 1, kValidation = 2, kNumeric = 3 };

struct Common {
  std::string config;
  std::string out = "runs/default";
  std::string variant;
  int layers = 0;
  long long seed = -1;
  std::string thresholds = "30,40,50";
  bool quiet = false;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "JSON training config (TrainConfig fields, model under \"model\")");
  app->add_option("--seed", c.seed, "Random seed (overrides config)");
  app->add_option("--variant", c.variant, "Model variant")->check(CLI::IsMember({"L", "m", "s"}));
  app->add_option("--layers", c.layers, "Number of stacked layers")->check(CLI::PositiveNumber);
  app->add_option("--out", c.out, "Output directory");
  app->add_option("--thresholds", c.thresholds, "CSI thresholds in data units, comma separated");
  app->add_flag("-q,--quiet", c.quiet, "Only print the final summary");
}

std::vector<double> parse_thresholds(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ','))
    if (!tok.empty()) {
      try {
        out.push_back(std::stod(tok));
      } catch (const std::exception&) {
        throw ConfigError("bad threshold '" + tok + "'");
      }
    }
  return out;
}

/// Relative dataset paths resolve against GMG_DATA_DIR when it is set.
std::string data_path(const std::string& p) {
  const char* root = std::getenv("GMG_DATA_DIR");
  if (root && *root && fs::path(p).is_relative()) return (fs::path(root) / p).string();
  return p;
}

TrainConfig load_config(const Common& c) {
  TrainConfig t;
  if (!c.config.empty()) t = train_config_from_json(read_json_file(c.config));
  if (!c.variant.empty()) t.model.apply_variant(c.variant);
  if (c.layers > 0) t.model.num_layers = c.layers;
  if (c.seed >= 0) t.seed = static_cast<std::uint64_t>(c.seed);
  return t;
}

/// Copies frame geometry from the dataset so configs need not repeat it.
void adopt_geometry(ModelConfig& m, const SequenceRecord& d, bool frames_from_config) {
  m.channels = d.data.dim(2), m.height = d.data.dim(3), m.width = d.data.dim(4);
  if (!frames_from_config && d.frames() < m.t_in + m.t_out) {
    m.t_in = d.frames() / 2;
    m.t_out = d.frames() - m.t_in;
  }
}

void print_summary(const MetricReport& r) {
  std::cout << "mse " << r["mse"] << "  mae " << r["mae"] << "  psnr " << r["psnr"] << "  ssim " << r["ssim"];
  for (double t : r.thresholds) std::cout << "  " << threshold_key(t) << " " << r[threshold_key(t)];
  std::cout << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GMG video prediction: data generation, training, evaluation, ablation and profiling"};
  app.require_subcommand(1);
  Common common;

  // gen-data
  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic sequence file");
  add_common(gen, common);
  std::string kind = "blobs", glyph_file, gen_name = "data.gmgs";
  int n_seq = 8, frames = 20, size = 64;
  gen->add_option("--kind", kind, "Dataset kind")->check(CLI::IsMember({"blobs", "mnist"}));
  gen->add_option("--n", n_seq, "Number of sequences")->check(CLI::PositiveNumber);
  gen->add_option("--frames", frames, "Frames per sequence")->check(CLI::PositiveNumber);
  gen->add_option("--size", size, "Frame height and width");
  gen->add_option("--glyphs", glyph_file, "MNIST idx3-ubyte file (default: bundled glyphs)");
  gen->add_option("--name", gen_name, "Output file name inside --out");

  // train
  auto* tr = app.add_subcommand("train", "Train a model on a sequence file");
  add_common(tr, common);
  std::string data, resume_from;
  int steps = -1;
  double lr = -1;
  tr->add_option("--data", data, "Sequence file")->required();
  tr->add_option("--steps", steps, "Optimizer steps (overrides config)");
  tr->add_option("--lr", lr, "Learning rate (overrides config)");
  tr->add_option("--resume", resume_from, "Continue from this checkpoint");

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a sequence file");
  add_common(ev, common);
  std::string checkpoint;
  ev->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  ev->add_option("--data", data, "Sequence file")->required();

  // ablate
  auto* ab = app.add_subcommand("ablate", "Train and evaluate the module ablation matrix");
  add_common(ab, common);
  std::string eval_data, specs_file;
  ab->add_option("--data", data, "Training sequence file")->required();
  ab->add_option("--eval-data", eval_data, "Held-out sequence file (default: the training file)");
  ab->add_option("--specs", specs_file, "JSON array of {name, gfm, sam, mgm} (default: full matrix)");
  ab->add_option("--steps", steps, "Optimizer steps per row (overrides config)");

  // profile
  auto* pf = app.add_subcommand("profile", "Report parameter counts, FLOPs and throughput");
  add_common(pf, common);
  int reps = 3;
  pf->add_option("--reps", reps, "Timed forecasts (0 skips timing)");

  // plot
  auto* pl = app.add_subcommand("plot", "Render curves and error maps from report files");
  add_common(pl, common);
  std::vector<std::string> reports;
  pl->add_option("reports", reports, "report.json files")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kOk : kUsage;
  }

  try {
    const std::vector<double> thresholds = parse_thresholds(common.thresholds);
    std::ostream* log = common.quiet ? nullptr : &std::cout;

    if (*gen) {
      const std::uint64_t seed = common.seed >= 0 ? static_cast<std::uint64_t>(common.seed) : 0;
      SequenceRecord rec;
      if (kind == "blobs") {
        BlobSpec bs;
        bs.size = size, bs.frames = frames;
        bs.min_sigma = size / 32.0, bs.max_sigma = size / 10.0, bs.max_speed = size / 42.0;
        rec = gen_blob_sequences(seed, n_seq, bs);
      } else {
        MovingMnistSpec ms;
        ms.size = size, ms.frames = frames;
        rec = gen_moving_mnist(seed, n_seq, glyph_file.empty() ? bundled_glyphs() : load_idx_glyphs(data_path(glyph_file)), ms);
      }
      fs::create_directories(common.out);
      const std::string path = (fs::path(common.out) / gen_name).string();
      save_sequences(rec, path);
      std::cout << "wrote " << path << " " << shape_str(rec.data.shape()) << "\n";
    } else if (*tr) {
      TrainConfig cfg = load_config(common);
      if (steps >= 0) cfg.steps = steps;
      if (lr >= 0) cfg.lr = lr;
      const SequenceRecord d = load_sequences(data_path(data));
      TrainedModel tm;
      if (!resume_from.empty()) {
        tm = resume(resume_from, cfg.steps, d, common.out, log);
      } else {
        adopt_geometry(cfg.model, d, !common.config.empty());
        cfg.validate();
        fs::create_directories(common.out);
        write_json_file(to_json(cfg), (fs::path(common.out) / "train_config.json").string());
        tm = train(cfg, d, common.out, log);
      }
      std::cout << "final mse " << (tm.result.mse.empty() ? 0.0 : tm.result.mse.back()) << "  checkpoint " << tm.result.checkpoint
                << "\n";
    } else if (*ev) {
      Checkpoint ck = load_checkpoint(checkpoint);
      const SequenceRecord d = load_sequences(data_path(data));
      const Evaluation e = evaluate(*ck.model, d, thresholds);
      fs::create_directories(common.out);
      write_json_file(to_json(e.report), (fs::path(common.out) / "report.json").string());
      save_sequences({e.predictions, {{"source", "predictions"}, {"scale", d.scale()}}}, (fs::path(common.out) / "predictions.gmgs").string());
      save_sequences({e.targets, {{"source", "targets"}, {"scale", d.scale()}}}, (fs::path(common.out) / "targets.gmgs").string());
      print_summary(e.report);
    } else if (*ab) {
      TrainConfig cfg = load_config(common);
      if (steps >= 0) cfg.steps = steps;
      const SequenceRecord d = load_sequences(data_path(data));
      const SequenceRecord e = eval_data.empty() ? d : load_sequences(data_path(eval_data));
      adopt_geometry(cfg.model, d, !common.config.empty());
      std::vector<AblationSpec> specs = standard_ablation();
      if (!specs_file.empty()) {
        specs.clear();
        for (const auto& j : read_json_file(specs_file)) specs.push_back(ablation_spec_from_json(j));
      }
      const auto rows = run_ablation(specs, cfg, d, e, thresholds, common.out, log);
      fs::create_directories(common.out);
      write_json_file(to_json(rows), (fs::path(common.out) / "ablation.json").string());
      std::cout << "name        params      flops/step   train_mse    eval_mse\n";
      bool failed = false;
      for (const auto& r : rows) {
        std::cout << r.spec.name << "  " << r.params << "  " << r.flops << "  ";
        if (r.error.empty()) {
          std::cout << r.final_train_mse << "  " << r.report["mse"] << "\n";
        } else {
          std::cout << "error: " << r.error << "\n";
          failed = true;
        }
      }
      return failed ? kNumeric : kOk;
    } else if (*pf) {
      const TrainConfig cfg = load_config(common);
      cfg.model.validate();
      std::cout << to_json(profile(cfg.model, reps, cfg.seed)).dump(2) << "\n";
    } else if (*pl) {
      for (const auto& p : emit_plots(reports, common.out)) std::cout << "wrote " << p << "\n";
    }
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kNumeric;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kValidation;
  }
  return kOk;
}
