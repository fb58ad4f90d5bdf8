#pragma once

#include <algorithm>
#include <optional>
#include <string>
#include <vector>

#include "gmg/cell_core.hpp"
#include "gmg/gfm.hpp"
#include "gmg/ghu.hpp"
#include "gmg/mgm.hpp"
#include "gmg/sam.hpp"

namespace gmg {

enum class GfmMode { Off, Full, Simple };

inline std::string to_string(GfmMode m) {
  switch (m) {
    case GfmMode::Off: return "off";
    case GfmMode::Full: return "full";
    case GfmMode::Simple: return "simplified";
  }
  return "?";
}

inline GfmMode parse_gfm_mode(const std::string& s) {
  if (s == "off") return GfmMode::Off;
  if (s == "full" || s == "on") return GfmMode::Full;
  if (s == "simplified" || s == "simple") return GfmMode::Simple;
  throw ConfigError("unknown GFM mode '" + s + "' (expected off|full|simplified)");
}

struct ModelConfig {
  std::string variant = "L";
  GfmMode gfm = GfmMode::Full;
  bool sam = true;
  bool mgm = true;
  bool ghu = false;
  int num_layers = 4;
  int hidden = 64;
  int patch = 4;
  int gate_kernel = 5;
  int filter_size = 3;
  int att_hidden = 32;
  int channels = 1;
  int height = 64;
  int width = 64;
  int t_in = 10;
  int t_out = 10;

  /// Module toggles for the named variant: L = everything, m = no SAM, s = simplified GFM.
  void apply_variant(const std::string& v) {
    if (v == "L") {
      gfm = GfmMode::Full, sam = true, mgm = true;
    } else if (v == "m") {
      gfm = GfmMode::Full, sam = false, mgm = true;
    } else if (v == "s") {
      gfm = GfmMode::Simple, sam = true, mgm = true;
    } else {
      throw ConfigError("unknown variant '" + v + "' (expected L, m or s)");
    }
    variant = v;
  }

  static ModelConfig for_variant(const std::string& v) {
    ModelConfig c;
    c.apply_variant(v);
    return c;
  }

  int patch_channels() const { return channels * patch * patch; }
  int grid_h() const { return height / patch; }
  int grid_w() const { return width / patch; }

  void validate() const {
    auto fail = [](const std::string& m) { throw ConfigError(m); };
    if (num_layers < 1) fail("num_layers must be >= 1");
    if (hidden < 1 || channels < 1 || patch < 1) fail("hidden, channels and patch must be positive");
    if (height % patch || width % patch)
      fail("frame " + std::to_string(height) + "x" + std::to_string(width) + " not divisible by patch " + std::to_string(patch));
    if (gate_kernel % 2 == 0 || filter_size % 2 == 0) fail("gate_kernel and filter_size must be odd");
    if (t_in < 1 || t_out < 1) fail("t_in and t_out must be >= 1");
    if (mgm) {
      if (hidden % 4) fail("MGM needs hidden divisible by 4");
      if (grid_h() % 2 || grid_w() % 2) fail("MGM needs an even patched grid");
    }
    if (sam && att_hidden < 1) fail("att_hidden must be positive");
    if (ghu && num_layers < 2) fail("GHU sits between layers 1 and 2; need num_layers >= 2");
  }
};

/// Space-to-depth on B x T x C x H x W; channel index c*p*p + dy*p + dx.
template <class T>
Tensor<T> patchify(const Tensor<T>& x, int p) {
  if (x.rank() != 5) throw ConfigError("patchify expects B x T x C x H x W, got " + shape_str(x.shape()));
  const int B = x.dim(0), S = x.dim(1), C = x.dim(2), H = x.dim(3), W = x.dim(4);
  if (p < 1 || H % p || W % p) throw ConfigError("patchify: " + shape_str(x.shape()) + " not divisible by patch " + std::to_string(p));
  const int Hp = H / p, Wp = W / p;
  Tensor<T> y({B, S, C * p * p, Hp, Wp});
  std::size_t src = 0;
  for (int n = 0; n < B * S; ++n)
    for (int c = 0; c < C; ++c)
      for (int yy = 0; yy < H; ++yy)
        for (int xx = 0; xx < W; ++xx, ++src) {
          const int ch = c * p * p + (yy % p) * p + (xx % p);
          y[((static_cast<std::size_t>(n) * C * p * p + ch) * Hp + yy / p) * Wp + xx / p] = x[src];
        }
  return y;
}

template <class T>
Tensor<T> unpatchify(const Tensor<T>& y, int p, int channels) {
  if (y.rank() != 5 || y.dim(2) != channels * p * p)
    throw ConfigError("unpatchify: " + shape_str(y.shape()) + " incompatible with " + std::to_string(channels) + " channels, patch " + std::to_string(p));
  const int B = y.dim(0), S = y.dim(1), Hp = y.dim(3), Wp = y.dim(4), H = Hp * p, W = Wp * p;
  Tensor<T> x({B, S, channels, H, W});
  std::size_t dst = 0;
  for (int n = 0; n < B * S; ++n)
    for (int c = 0; c < channels; ++c)
      for (int yy = 0; yy < H; ++yy)
        for (int xx = 0; xx < W; ++xx, ++dst) {
          const int ch = c * p * p + (yy % p) * p + (xx % p);
          x[dst] = y[((static_cast<std::size_t>(n) * channels * p * p + ch) * Hp + yy / p) * Wp + xx / p];
        }
  return x;
}

template <class T>
struct LayerParams {
  StConvLstmParams<T> cell;
  std::optional<GfmParams<T>> gfm;
  std::optional<GfmSimpleParams<T>> gfm_simple;
  std::optional<SamParams<T>> sam;
  std::optional<MgmParams<T>> mgm;
};

template <class T>
struct StackState {
  std::vector<LayerState<T>> layers;
  std::vector<MotionState<T>> motion;
  Var<T> memory;  // M leaving the top layer, consumed by layer 1 next step
  Var<T> highway;
};

template <class T>
struct CellStepOutput {
  Var<T> x_out;
  LayerState<T> state;
  Var<T> m_out;
  MotionState<T> motion;
};

/// One layer at one time step: ST-ConvLSTM, then GFM, SAM and MGM as configured.
/// `frame` is the patched raw frame that GFM draws global context from.
template <class T>
CellStepOutput<T> gmg_cell_step(Graph<T>& g, const LayerParams<T>& p, const Var<T>& x_in, const Var<T>& frame,
                                const LayerState<T>& state, const Var<T>& m_in, const MotionState<T>& motion, int t_index) {
  CellStepOutput<T> out;
  out.state = st_convlstm_step(g, p.cell, x_in, state.h, state.c, m_in);
  Var<T> hg = out.state.h;
  if (p.gfm) hg = gfm_forward(g, *p.gfm, frame, hg);
  else if (p.gfm_simple) hg = gfm_simple(g, *p.gfm_simple, frame, hg);
  out.m_out = out.state.m;
  if (p.sam) {
    const SamUpdate<T> s = sam_forward(g, *p.sam, hg, out.state.m);
    hg = s.h;
    out.m_out = s.m;
  }
  out.x_out = hg;
  out.motion = motion;
  if (p.mgm) {
    MgmOutput<T> m = mgm_forward(g, *p.mgm, hg, motion, t_index);
    out.x_out = m.x_out;
    out.motion = m.state;
  }
  return out;
}

/// Ground truth replaces the model's own prediction with probability `teacher_prob`
/// during the forecast phase (per batch element, drawn from `rng`).
struct RolloutOptions {
  double teacher_prob = 0.0;
  Rng* rng = nullptr;
};

template <class T>
class GmgModel {
 public:
  explicit GmgModel(ModelConfig cfg) : cfg_(std::move(cfg)) {
    cfg_.validate();
    const int cp = cfg_.patch_channels(), h = cfg_.hidden;
    for (int l = 0; l < cfg_.num_layers; ++l) {
      const std::string pre = "layer" + std::to_string(l) + ".";
      LayerParams<T> lp{StConvLstmParams<T>::create(params_, pre + "cell.", l == 0 ? cp : h, h, cfg_.gate_kernel), {}, {}, {}, {}};
      if (cfg_.gfm == GfmMode::Full) lp.gfm = GfmParams<T>::create(params_, pre + "gfm.", cp, h);
      if (cfg_.gfm == GfmMode::Simple) lp.gfm_simple = GfmSimpleParams<T>::create(params_, pre + "gfm.", cp, h);
      if (cfg_.sam) lp.sam = SamParams<T>::create(params_, pre + "sam.", h, cfg_.att_hidden, cfg_.gate_kernel);
      if (cfg_.mgm) lp.mgm = MgmParams<T>::create(params_, pre + "mgm.", h, cfg_.filter_size);
      layers_.push_back(std::move(lp));
    }
    if (cfg_.ghu) ghu_ = GhuParams<T>::create(params_, "ghu.", h, cfg_.gate_kernel);
    w_out_ = &params_.add("head.w", {cp, h, 1, 1});
    b_out_ = &params_.add("head.b", {cp});
  }

  GmgModel(const GmgModel&) = delete;
  GmgModel& operator=(const GmgModel&) = delete;

  void init(Rng& rng) {
    for (auto& lp : layers_) {
      lp.cell.init(rng);
      if (lp.gfm) lp.gfm->init(rng);
      if (lp.gfm_simple) lp.gfm_simple->init(rng);
      if (lp.sam) lp.sam->init(rng);
      if (lp.mgm) lp.mgm->init(rng);
    }
    if (ghu_) ghu_->init(rng);
    init_kernel(*w_out_, rng);
    b_out_->value.fill(T(0));
  }

  const ModelConfig& config() const { return cfg_; }
  ParameterSet<T>& params() { return params_; }
  const ParameterSet<T>& params() const { return params_; }
  const std::vector<LayerParams<T>>& layers() const { return layers_; }

  StackState<T> initial_state(Graph<T>& g, int batch) const {
    const int h = cfg_.hidden, Hp = cfg_.grid_h(), Wp = cfg_.grid_w();
    StackState<T> s;
    auto zeros = [&](Shape shape) { return g.constant(Tensor<T>(std::move(shape))); };
    for (int l = 0; l < cfg_.num_layers; ++l) {
      const Var<T> z = zeros({batch, h, Hp, Wp});
      s.layers.push_back({z, z, z});
      if (cfg_.mgm) {
        const Var<T> fz = zeros({batch, layers_[l].mgm->motion_channels, Hp / 2, Wp / 2});
        s.motion.push_back({fz, fz});
      } else {
        s.motion.push_back({});
      }
    }
    s.memory = zeros({batch, h, Hp, Wp});
    if (ghu_) s.highway = zeros({batch, h, Hp, Wp});
    return s;
  }

  /// One time step through the stack; returns the patched next-frame estimate.
  Var<T> step(Graph<T>& g, StackState<T>& s, const Var<T>& frame, int t_index) const {
    Var<T> x = frame;
    Var<T> m = s.memory;
    for (int l = 0; l < cfg_.num_layers; ++l) {
      CellStepOutput<T> o = gmg_cell_step(g, layers_[l], x, frame, s.layers[l], m, s.motion[l], t_index);
      s.layers[l] = o.state;
      s.motion[l] = o.motion;
      m = o.m_out;
      x = o.x_out;
      if (l == 0 && ghu_) {
        s.highway = ghu_step(g, *ghu_, x, s.highway);
        x = s.highway;
      }
    }
    s.memory = m;
    return ops::conv2d_same(x, g.param(*w_out_), g.param(*b_out_));
  }

  /// Autoregressive rollout over patched frames B x T x Cp x Hp x Wp with T >= t_in
  /// (T >= t_in + t_out when teacher forcing is requested). Returns t_out patched
  /// predictions for frames t_in .. t_in + t_out - 1, unclamped.
  std::vector<Var<T>> rollout(Graph<T>& g, const Tensor<T>& patched, const RolloutOptions& opt = {}) const {
    const int B = patched.dim(0), T_in = cfg_.t_in, T_out = cfg_.t_out;
    gmg::detail::require(patched.rank() == 5 && patched.dim(2) == cfg_.patch_channels() && patched.dim(3) == cfg_.grid_h() &&
                        patched.dim(4) == cfg_.grid_w(),
                    "rollout: frames " + shape_str(patched.shape()) + " do not match the model configuration");
    gmg::detail::require(patched.dim(1) >= T_in, "rollout: need at least t_in input frames");
    const bool teacher = opt.teacher_prob > 0.0;
    gmg::detail::require(!teacher || (opt.rng && patched.dim(1) >= T_in + T_out), "rollout: teacher forcing needs targets and an rng");

    StackState<T> s = initial_state(g, B);
    std::vector<Var<T>> preds;
    Var<T> last;
    for (int t = 0; t < T_in + T_out - 1; ++t) {
      Var<T> input;
      if (t < T_in) {
        input = g.constant(frame_at(patched, t));
      } else if (teacher) {
        const Tensor<T> truth = frame_at(patched, t);
        Tensor<T> mix = last.value();
        const std::size_t per = mix.size() / B;
        std::vector<bool> use(B);
        for (int b = 0; b < B; ++b) use[b] = opt.rng->uniform() < opt.teacher_prob;
        // Selected elements become constants; the rest keep gradient flow through the prediction.
        Tensor<T> keep(mix.shape());
        for (int b = 0; b < B; ++b)
          for (std::size_t i = 0; i < per; ++i) {
            const std::size_t k = b * per + i;
            keep[k] = use[b] ? T(0) : T(1);
            mix[k] = use[b] ? truth[k] : T(0);
          }
        input = ops::add(ops::mul(last, g.constant(std::move(keep))), g.constant(std::move(mix)));
      } else {
        input = last;
      }
      last = step(g, s, input, t + 1);
      if (t >= T_in - 1) preds.push_back(last);
    }
    return preds;
  }

  /// Inference on raw frames B x T x C x H x W; returns B x t_out x C x H x W clamped to [0, 1].
  Tensor<T> forward_sequence(const Tensor<T>& frames) const {
    gmg::detail::require(cfg_.t_out >= 1, "forward_sequence: horizon must be >= 1");
    Graph<T> g;
    g.set_track_params(false);
    const std::vector<Var<T>> preds = rollout(g, patchify(frames, cfg_.patch));
    std::vector<Tensor<T>> outs;
    for (const auto& p : preds) outs.push_back(p.value());
    Tensor<T> y = unpatchify(stack_frames(outs), cfg_.patch, cfg_.channels);
    for (auto& v : y.values()) v = std::clamp(v, T(0), T(1));
    return y;
  }

 private:
  ModelConfig cfg_;
  ParameterSet<T> params_;
  std::vector<LayerParams<T>> layers_;
  std::optional<GhuParams<T>> ghu_;
  Parameter<T>* w_out_ = nullptr;
  Parameter<T>* b_out_ = nullptr;
};

}  // namespace gmg
