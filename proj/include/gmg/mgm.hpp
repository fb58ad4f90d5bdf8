#pragma once

#include <string>

#include "gmg/conv.hpp"
#include "gmg/init.hpp"

namespace gmg {

/// Transient variation F and trending momentum D, both B x 2k^2 x H/2 x W/2.
/// Channel 2*tap holds the column displacement of kernel tap `tap`, 2*tap+1 the row displacement.
template <class T>
struct MotionState {
  Var<T> f;
  Var<T> d;
};

/// Balance/decay factors for one step, each B x 2k^2.
template <class T>
struct DeformFactors {
  Var<T> alpha, beta, alpha_d, beta_d;
};

template <class T>
struct TrendUpdate {
  Var<T> d_decayed;   // D' after growth and decay
  Var<T> d_momentum;  // D^M, carried as next-step D
  Var<T> f_new;       // F_t
};

/// Motion Guided Module kernels.
///   w_enc:  stride-2 3x3, C -> C/4
///   w_ur:   [update; reset] gates over [h_enc; F]
///   w_z:    candidate over [h_enc; F o r]
///   w_fac:  pooled h_enc -> [alpha_d; beta_d] logits
///   alpha_prior, beta_prior: learnable priors
///   w_def:  k x k deformable kernel, C/4 -> C/4
///   w_dec:  stride-2 2x2 transposed kernel, C/4 -> C
template <class T>
struct MgmParams {
  Parameter<T>* w_enc = nullptr;
  Parameter<T>* b_enc = nullptr;
  Parameter<T>* w_ur = nullptr;
  Parameter<T>* b_ur = nullptr;
  Parameter<T>* w_z = nullptr;
  Parameter<T>* b_z = nullptr;
  Parameter<T>* w_fac = nullptr;
  Parameter<T>* b_fac = nullptr;
  Parameter<T>* alpha_prior = nullptr;
  Parameter<T>* beta_prior = nullptr;
  Parameter<T>* w_def = nullptr;
  Parameter<T>* b_def = nullptr;
  Parameter<T>* w_dec = nullptr;
  Parameter<T>* b_dec = nullptr;
  int channels = 0, encoded = 0, filter = 0, motion_channels = 0;

  /// `motion_channels` defaults to 2k^2; smaller values are only meaningful
  /// for exercising the recurrent pieces in isolation.
  static MgmParams create(ParameterSet<T>& set, const std::string& prefix, int channels, int filter,
                          int motion_channels = -1) {
    if (channels % 4 != 0) throw ConfigError("MGM needs hidden channels divisible by 4, got " + std::to_string(channels));
    if (filter % 2 == 0) throw ConfigError("MGM filter size must be odd");
    MgmParams p;
    p.channels = channels;
    p.encoded = channels / 4;
    p.filter = filter;
    p.motion_channels = motion_channels > 0 ? motion_channels : 2 * filter * filter;
    const int C = channels, Ce = p.encoded, K = p.motion_channels, k = filter;
    p.w_enc = &set.add(prefix + "w_enc", {Ce, C, 3, 3});
    p.b_enc = &set.add(prefix + "b_enc", {Ce});
    p.w_ur = &set.add(prefix + "w_ur", {2 * K, Ce + K, k, k});
    p.b_ur = &set.add(prefix + "b_ur", {2 * K});
    p.w_z = &set.add(prefix + "w_z", {K, Ce + K, k, k});
    p.b_z = &set.add(prefix + "b_z", {K});
    p.w_fac = &set.add(prefix + "w_fac", {2 * K, Ce});
    p.b_fac = &set.add(prefix + "b_fac", {2 * K});
    p.alpha_prior = &set.add(prefix + "alpha_prior", {K}, T(0.5));
    p.beta_prior = &set.add(prefix + "beta_prior", {K}, T(0.5));
    p.w_def = &set.add(prefix + "w_def", {Ce, Ce, k, k});
    p.b_def = &set.add(prefix + "b_def", {Ce});
    p.w_dec = &set.add(prefix + "w_dec", {Ce, C, 2, 2});
    p.b_dec = &set.add(prefix + "b_dec", {C});
    return p;
  }

  void init(Rng& rng) const {
    for (auto* w : {w_enc, w_ur, w_z, w_fac, w_def}) init_kernel(*w, rng);
    init_fan_in(*w_dec, rng, encoded * 4);
    for (auto* b : {b_enc, b_ur, b_z, b_fac, b_def, b_dec}) b->value.fill(T(0));
    alpha_prior->value.fill(T(0.5));
    beta_prior->value.fill(T(0.5));
  }
};

/// Stride-2 encoder: B x C x H x W -> B x C/4 x H/2 x W/2.
template <class T>
Var<T> mgm_encode(Graph<T>& g, const MgmParams<T>& p, const Var<T>& hg) {
  const Shape& s = hg.shape();
  if (s.size() != 4 || s[1] != p.channels || s[1] % 4 != 0)
    throw ConfigError("mgm_encode: expected " + std::to_string(p.channels) + " channels (divisible by 4), got " + shape_str(s));
  if (s[2] % 2 != 0 || s[3] % 2 != 0) throw ConfigError("mgm_encode: spatial dims must be even, got " + shape_str(s));
  return ops::conv2d(hg, g.param(*p.w_enc), g.param(*p.b_enc), 2, 1);
}

/// Convolutional GRU over the transient variation; returns F'.
template <class T>
Var<T> motion_gru(Graph<T>& g, const MgmParams<T>& p, const Var<T>& h_enc, const Var<T>& f_prev) {
  using namespace ops;
  const int K = p.motion_channels;
  gmg::detail::require(f_prev.shape() == Shape{h_enc.dim(0), K, h_enc.dim(2), h_enc.dim(3)},
                       "motion_gru: F " + shape_str(f_prev.shape()) + " incompatible with encoded hidden " + shape_str(h_enc.shape()));
  const Var<T> ur = sigmoid(conv2d_same(concat_channels<T>({h_enc, f_prev}), g.param(*p.w_ur), g.param(*p.b_ur)));
  const Var<T> u = slice_channels(ur, 0, K);
  const Var<T> r = slice_channels(ur, K, K);
  const Var<T> z = tanh(conv2d_same(concat_channels<T>({h_enc, mul(f_prev, r)}), g.param(*p.w_z), g.param(*p.b_z)));
  return blend(z, f_prev, u);
}

/// Dynamic factors from pooled features, fused with the learnable priors by arithmetic mean.
template <class T>
DeformFactors<T> deform_factors(Graph<T>& g, const MgmParams<T>& p, const Var<T>& h_enc) {
  using namespace ops;
  const int B = h_enc.dim(0), K = p.motion_channels;
  const Var<T> pooled = reshape(adaptive_avg_pool(h_enc, 1, 1), {B, h_enc.dim(1)});
  const Var<T> act = sigmoid(linear(pooled, g.param(*p.w_fac), g.param(*p.b_fac)));
  DeformFactors<T> f;
  f.alpha_d = slice_cols(act, 0, K);
  f.beta_d = slice_cols(act, K, K);
  f.alpha = scale(add(f.alpha_d, repeat_batch(g.param(*p.alpha_prior), B)), T(0.5));
  f.beta = scale(add(f.beta_d, repeat_batch(g.param(*p.beta_prior), B)), T(0.5));
  return f;
}

/// D_e = exp(-beta * t) for the 1-based recurrence step t.
template <class T>
Var<T> time_delay(const Var<T>& beta, int t_index) {
  gmg::detail::require(t_index >= 1, "time_delay: t_index must be >= 1");
  return ops::exp(ops::scale(beta, static_cast<T>(-t_index)));
}

/// D' = D_e D + alpha alpha_d D;  D^M = (D' + F)/2;  F_t = D^M + F.
template <class T>
TrendUpdate<T> trend_update(const Var<T>& d_prev, const Var<T>& f_prev, const Var<T>& delay, const Var<T>& alpha,
                            const Var<T>& alpha_d) {
  using namespace ops;
  gmg::detail::require(d_prev.shape() == f_prev.shape(), "trend_update: D and F shapes differ");
  const Var<T> coef = add(delay, mul(alpha, alpha_d));
  TrendUpdate<T> u;
  u.d_decayed = mul_channelwise(d_prev, coef);
  u.d_momentum = add(scale(u.d_decayed, T(0.5)), scale(f_prev, T(0.5)));
  u.f_new = add(u.d_momentum, f_prev);
  return u;
}

/// Deformable k x k convolution of h_enc with per-tap offsets F.
template <class T>
Var<T> deformable_warp(Graph<T>& g, const MgmParams<T>& p, const Var<T>& h_enc, const Var<T>& f) {
  return ops::deform_conv2d(h_enc, f, g.param(*p.w_def), g.param(*p.b_def));
}

/// Stride-2 transposed convolution back to B x C x H x W.
template <class T>
Var<T> mgm_decode(Graph<T>& g, const MgmParams<T>& p, const Var<T>& x_warp) {
  return ops::conv_transpose2d(x_warp, g.param(*p.w_dec), g.param(*p.b_dec), 2, 0);
}

template <class T>
struct MgmOutput {
  Var<T> x_out;
  MotionState<T> state;
};

/// encode -> GRU -> factors -> delay -> trend -> warp -> decode, added back onto `hg`.
template <class T>
MgmOutput<T> mgm_forward(Graph<T>& g, const MgmParams<T>& p, const Var<T>& hg, const MotionState<T>& prev, int t_index) {
  auto scope = g.scope("mgm");
  const Var<T> h_enc = mgm_encode(g, p, hg);
  const Var<T> f_reset = motion_gru(g, p, h_enc, prev.f);
  const DeformFactors<T> fac = deform_factors(g, p, h_enc);
  const TrendUpdate<T> tr = trend_update(prev.d, f_reset, time_delay(fac.beta, t_index), fac.alpha, fac.alpha_d);
  const Var<T> warped = deformable_warp(g, p, h_enc, tr.f_new);
  return {ops::add(hg, mgm_decode(g, p, warped)), {tr.f_new, tr.d_momentum}};
}

}  // namespace gmg
