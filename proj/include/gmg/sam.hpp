#pragma once

#include <string>

#include "gmg/conv.hpp"
#include "gmg/init.hpp"

namespace gmg {

/// Self-Attention Memory kernels. Projections are 1x1 convolutions; the gate
/// kernels are depthwise-separable (depthwise k x k, then pointwise 1x1).
template <class T>
struct SamParams {
  // Memory attention: query from H^g, key/value from M.
  Parameter<T>* wq_m = nullptr;
  Parameter<T>* bq_m = nullptr;
  Parameter<T>* wk_m = nullptr;
  Parameter<T>* bk_m = nullptr;
  Parameter<T>* wv_m = nullptr;
  Parameter<T>* bv_m = nullptr;
  // Self attention over H^g.
  Parameter<T>* wq_h = nullptr;
  Parameter<T>* bq_h = nullptr;
  Parameter<T>* wk_h = nullptr;
  Parameter<T>* bk_h = nullptr;
  Parameter<T>* wv_h = nullptr;
  Parameter<T>* bv_h = nullptr;
  Parameter<T>* w_z = nullptr;  // [Z_h; Z_m] -> C
  Parameter<T>* b_z = nullptr;
  // Gate order: zi, hi, zc, hc, zo, ho.
  Parameter<T>* dw[6] = {};
  Parameter<T>* pw[6] = {};
  Parameter<T>* b_gate[3] = {};  // b_i, b_c, b_o
  int channels = 0, att_hidden = 0, kernel = 0;

  static constexpr const char* kGateNames[6] = {"zi", "hi", "zc", "hc", "zo", "ho"};

  static SamParams create(ParameterSet<T>& set, const std::string& prefix, int channels, int att_hidden, int kernel) {
    if (kernel % 2 == 0) throw ConfigError("SAM gate kernel must be odd");
    SamParams p;
    p.channels = channels;
    p.att_hidden = att_hidden;
    p.kernel = kernel;
    const int C = channels, d = att_hidden;
    auto proj = [&](const char* n, int out, Parameter<T>*& w, Parameter<T>*& b) {
      w = &set.add(prefix + "w" + n, {out, C, 1, 1});
      b = &set.add(prefix + "b" + n, {out});
    };
    proj("q_m", d, p.wq_m, p.bq_m);
    proj("k_m", d, p.wk_m, p.bk_m);
    proj("v_m", C, p.wv_m, p.bv_m);
    proj("q_h", d, p.wq_h, p.bq_h);
    proj("k_h", d, p.wk_h, p.bk_h);
    proj("v_h", C, p.wv_h, p.bv_h);
    p.w_z = &set.add(prefix + "w_z", {C, 2 * C, 1, 1});
    p.b_z = &set.add(prefix + "b_z", {C});
    for (int i = 0; i < 6; ++i) {
      p.dw[i] = &set.add(prefix + "dw_" + kGateNames[i], {C, 1, kernel, kernel});
      p.pw[i] = &set.add(prefix + "pw_" + kGateNames[i], {C, C, 1, 1});
    }
    p.b_gate[0] = &set.add(prefix + "b_i", {C});
    p.b_gate[1] = &set.add(prefix + "b_c", {C});
    p.b_gate[2] = &set.add(prefix + "b_o", {C});
    return p;
  }

  void init(Rng& rng) const {
    for (auto* w : {wq_m, wk_m, wv_m, wq_h, wk_h, wv_h, w_z}) init_kernel(*w, rng);
    for (auto* b : {bq_m, bk_m, bv_m, bq_h, bk_h, bv_h, b_z}) b->value.fill(T(0));
    for (int i = 0; i < 6; ++i) {
      init_kernel(*dw[i], rng);
      init_kernel(*pw[i], rng);
    }
    for (auto* b : b_gate) b->value.fill(T(0));
  }

  /// Parameters of the separable gate path versus dense k x k convolutions doing the same job.
  std::size_t separable_gate_size() const {
    std::size_t n = 0;
    for (int i = 0; i < 6; ++i) n += dw[i]->size() + pw[i]->size();
    return n;
  }
  std::size_t dense_gate_size() const {
    return 6ull * channels * channels * kernel * kernel;
  }
};

/// z = W_z [Z_h; Z_m], where Z_m attends from H^g into M and Z_h is self-attention over H^g.
template <class T>
Var<T> sam_attend(Graph<T>& g, const SamParams<T>& p, const Var<T>& hg, const Var<T>& m_prev) {
  using namespace ops;
  gmg::detail::require(hg.shape() == m_prev.shape() && hg.dim(1) == p.channels,
                  "sam_attend: hidden " + shape_str(hg.shape()) + " vs memory " + shape_str(m_prev.shape()));
  auto proj = [&](const Var<T>& x, Parameter<T>* w, Parameter<T>* b) { return conv2d_same(x, g.param(*w), g.param(*b)); };
  const Var<T> z_m = attend(proj(hg, p.wq_m, p.bq_m), proj(m_prev, p.wk_m, p.bk_m), proj(m_prev, p.wv_m, p.bv_m));
  const Var<T> z_h = attend(proj(hg, p.wq_h, p.bq_h), proj(hg, p.wk_h, p.bk_h), proj(hg, p.wv_h, p.bv_h));
  return conv2d_same(concat_channels<T>({z_h, z_m}), g.param(*p.w_z), g.param(*p.b_z));
}

template <class T>
struct SamUpdate {
  Var<T> h;  // attention-refined hidden
  Var<T> m;  // updated memory
};

/// Gated memory write: i, C^a from (z, H^g); M = (1-i) o M_prev + i o C^a; H = o o M.
template <class T>
SamUpdate<T> sam_update(Graph<T>& g, const SamParams<T>& p, const Var<T>& z, const Var<T>& hg, const Var<T>& m_prev) {
  using namespace ops;
  gmg::detail::require(z.shape() == hg.shape() && hg.shape() == m_prev.shape(),
                  "sam_update: z " + shape_str(z.shape()) + ", hidden " + shape_str(hg.shape()) + ", memory " +
                      shape_str(m_prev.shape()) + " must agree");
  auto sep = [&](int i, const Var<T>& x, const Var<T>& bias) {
    return conv2d_same(depthwise_conv2d(x, g.param(*p.dw[i])), g.param(*p.pw[i]), bias);
  };
  auto pre = [&](int gate) {
    return add(sep(2 * gate, z, g.param(*p.b_gate[gate])), sep(2 * gate + 1, hg, Var<T>{}));
  };
  const Var<T> i = sigmoid(pre(0));
  const Var<T> c = tanh(pre(1));
  const Var<T> m = blend(c, m_prev, i);
  const Var<T> o = sigmoid(pre(2));
  return {mul(o, m), m};
}

template <class T>
SamUpdate<T> sam_forward(Graph<T>& g, const SamParams<T>& p, const Var<T>& hg, const Var<T>& m_prev) {
  auto scope = g.scope("sam");
  return sam_update(g, p, sam_attend(g, p, hg, m_prev), hg, m_prev);
}

}  // namespace gmg
