#pragma once

#include <string>

#include "gmg/conv.hpp"
#include "gmg/init.hpp"

namespace gmg {

/// Global Focus Module kernels. `x` below is always the patched input frame.
template <class T>
struct GfmParams {
  Parameter<T>* w_pre = nullptr;  // 1x1, Cin -> hidden, before pooling
  Parameter<T>* b_pre = nullptr;
  Parameter<T>* w_lin = nullptr;  // hidden x hidden projection of the pooled vector
  Parameter<T>* b_lin = nullptr;
  Parameter<T>* w_gate = nullptr;  // 1x1, [H; X^g] -> hidden
  Parameter<T>* b_gate = nullptr;
  Parameter<T>* w_ms[3] = {nullptr, nullptr, nullptr};  // Cin -> hidden at kernel 1, 3, 5
  Parameter<T>* b_ms[3] = {nullptr, nullptr, nullptr};
  int in_channels = 0, hidden = 0;

  static constexpr int kScales[3] = {1, 3, 5};

  static GfmParams create(ParameterSet<T>& set, const std::string& prefix, int cin, int hidden) {
    GfmParams p;
    p.in_channels = cin;
    p.hidden = hidden;
    p.w_pre = &set.add(prefix + "w_pre", {hidden, cin, 1, 1});
    p.b_pre = &set.add(prefix + "b_pre", {hidden});
    p.w_lin = &set.add(prefix + "w_lin", {hidden, hidden});
    p.b_lin = &set.add(prefix + "b_lin", {hidden});
    p.w_gate = &set.add(prefix + "w_gate", {hidden, 2 * hidden, 1, 1});
    p.b_gate = &set.add(prefix + "b_gate", {hidden});
    for (int s = 0; s < 3; ++s) {
      const int k = kScales[s];
      p.w_ms[s] = &set.add(prefix + "w_ms" + std::to_string(k), {hidden, cin, k, k});
      p.b_ms[s] = &set.add(prefix + "b_ms" + std::to_string(k), {hidden});
    }
    return p;
  }

  void init(Rng& rng) const {
    init_kernel(*w_pre, rng);
    init_kernel(*w_lin, rng);
    init_kernel(*w_gate, rng);
    for (auto* w : w_ms) init_kernel(*w, rng);
    for (auto* b : {b_pre, b_lin, b_gate, b_ms[0], b_ms[1], b_ms[2]}) b->value.fill(T(0));
  }
};

/// Single-convolution replacement used by the lightweight variant.
template <class T>
struct GfmSimpleParams {
  Parameter<T>* w = nullptr;  // 3x3, Cin -> hidden
  Parameter<T>* b = nullptr;

  static GfmSimpleParams create(ParameterSet<T>& set, const std::string& prefix, int cin, int hidden) {
    return {&set.add(prefix + "w", {hidden, cin, 3, 3}), &set.add(prefix + "b", {hidden})};
  }
  void init(Rng& rng) const {
    init_kernel(*w, rng);
    b->value.fill(T(0));
  }
};

/// X^g = ReLU(Linear(AAP_1x1(ReLU(Conv(x))))) broadcast to B x hidden x H x W.
template <class T>
Var<T> global_feature(Graph<T>& g, const GfmParams<T>& p, const Var<T>& x) {
  using namespace ops;
  const int B = x.dim(0), H = x.dim(2), W = x.dim(3);
  const Var<T> pooled = adaptive_avg_pool(relu(conv2d_same(x, g.param(*p.w_pre), g.param(*p.b_pre))), 1, 1);
  const Var<T> proj = relu(linear(reshape(pooled, {B, p.hidden}), g.param(*p.w_lin), g.param(*p.b_lin)));
  if (!proj.value().all_finite()) throw NumericError("global_feature: non-finite activations");
  return broadcast_spatial(proj, H, W);
}

/// H^g = H o G + X^g o (1 - G), G = sigmoid(Conv([H; X^g])).
template <class T>
Var<T> gated_fuse(Graph<T>& g, const GfmParams<T>& p, const Var<T>& h, const Var<T>& xg) {
  using namespace ops;
  gmg::detail::require(h.shape() == xg.shape(), "gated_fuse: hidden " + shape_str(h.shape()) + " vs global " + shape_str(xg.shape()));
  const Var<T> gate = sigmoid(conv2d_same(concat_channels<T>({h, xg}), g.param(*p.w_gate), g.param(*p.b_gate)));
  return blend(h, xg, gate);
}

/// Per-(batch, channel) focus weights sigmoid(GAP(sum_k Conv_k(x))), k in {1,3,5}.
template <class T>
Var<T> focus_weights(Graph<T>& g, const GfmParams<T>& p, const Var<T>& x) {
  using namespace ops;
  Var<T> acc;
  for (int s = 0; s < 3; ++s) {
    const Var<T> branch = conv2d_same(x, g.param(*p.w_ms[s]), g.param(*p.b_ms[s]));
    acc = acc.valid() ? add(acc, branch) : branch;
  }
  return sigmoid(global_avg_pool(acc));
}

template <class T>
Var<T> feature_focus(Graph<T>& g, const GfmParams<T>& p, const Var<T>& hg, const Var<T>& x) {
  gmg::detail::require(hg.dim(0) == x.dim(0) && hg.dim(2) == x.dim(2) && hg.dim(3) == x.dim(3),
                  "feature_focus: hidden " + shape_str(hg.shape()) + " vs input " + shape_str(x.shape()));
  return ops::mul_channelwise(hg, focus_weights(g, p, x));
}

/// Full module: global feature, gated fusion, then feature focus.
template <class T>
Var<T> gfm_forward(Graph<T>& g, const GfmParams<T>& p, const Var<T>& x, const Var<T>& h) {
  auto scope = g.scope("gfm");
  return feature_focus(g, p, gated_fuse(g, p, h, global_feature(g, p, x)), x);
}

/// Lightweight variant: h o Conv(x).
template <class T>
Var<T> gfm_simple(Graph<T>& g, const GfmSimpleParams<T>& p, const Var<T>& x, const Var<T>& h) {
  auto scope = g.scope("gfm");
  const Var<T> gf = ops::conv2d_same(x, g.param(*p.w), g.param(*p.b));
  gmg::detail::require(gf.shape() == h.shape(), "gfm_simple: conv output " + shape_str(gf.shape()) + " vs hidden " + shape_str(h.shape()));
  return ops::mul(h, gf);
}

}  // namespace gmg
