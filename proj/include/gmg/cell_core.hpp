#pragma once

#include <string>

#include "gmg/conv.hpp"
#include "gmg/init.hpp"

namespace gmg {

/// Kernels of the dual-memory ST-ConvLSTM cell. Gate kernels are stacked along
/// the output axis so each input is convolved once:
///   w_x: [f, i, c, f', i', c', o] x Cin    (7 gate biases live here)
///   w_h: [f, i, c, o] x hidden             (applied to H_{t-1})
///   w_m: [f', i', c'] x hidden             (applied to M_{t-1})
///   w_cm: o x [C_t, M_t]                   (W_co and W_mo side by side)
///   w_fuse: 1x1 map [C_t, M_t] -> hidden
template <class T>
struct StConvLstmParams {
  Parameter<T>* w_x = nullptr;
  Parameter<T>* b = nullptr;
  Parameter<T>* w_h = nullptr;
  Parameter<T>* w_m = nullptr;
  Parameter<T>* w_cm = nullptr;
  Parameter<T>* w_fuse = nullptr;
  int in_channels = 0, hidden = 0, kernel = 0;

  static StConvLstmParams create(ParameterSet<T>& set, const std::string& prefix, int cin, int hidden, int kernel) {
    if (kernel % 2 == 0) throw ConfigError("ST-ConvLSTM kernel must be odd, got " + std::to_string(kernel));
    StConvLstmParams p;
    p.in_channels = cin;
    p.hidden = hidden;
    p.kernel = kernel;
    p.w_x = &set.add(prefix + "w_x", {7 * hidden, cin, kernel, kernel});
    p.b = &set.add(prefix + "b", {7 * hidden});
    p.w_h = &set.add(prefix + "w_h", {4 * hidden, hidden, kernel, kernel});
    p.w_m = &set.add(prefix + "w_m", {3 * hidden, hidden, kernel, kernel});
    p.w_cm = &set.add(prefix + "w_cm", {hidden, 2 * hidden, kernel, kernel});
    p.w_fuse = &set.add(prefix + "w_fuse", {hidden, 2 * hidden, 1, 1});
    return p;
  }

  /// Fan-in uniform kernels; forget biases (f and f') start at 1.
  void init(Rng& rng) const {
    for (auto* w : {w_x, w_h, w_m, w_cm, w_fuse}) init_kernel(*w, rng);
    b->value.fill(T(0));
    for (int c = 0; c < hidden; ++c) {
      b->value[c] = T(1);               // f
      b->value[3 * hidden + c] = T(1);  // f'
    }
  }
};

template <class T>
struct LayerState {
  Var<T> h, c, m;
};

/// One ST-ConvLSTM update. `m_in` is the spatiotemporal memory entering this
/// layer (from the layer below, or from the top layer at the previous step).
template <class T>
LayerState<T> st_convlstm_step(Graph<T>& g, const StConvLstmParams<T>& p, const Var<T>& x, const Var<T>& h_prev,
                               const Var<T>& c_prev, const Var<T>& m_in) {
  const Shape hs{x.dim(0), p.hidden, x.dim(2), x.dim(3)};
  gmg::detail::require(x.shape().size() == 4 && x.dim(1) == p.in_channels,
                  "st_convlstm_step: input " + shape_str(x.shape()) + " does not have " + std::to_string(p.in_channels) + " channels");
  gmg::detail::require(h_prev.shape() == hs && c_prev.shape() == hs && m_in.shape() == hs,
                  "st_convlstm_step: state shapes must be " + shape_str(hs));
  require_finite_params<T>({p.w_x, p.b, p.w_h, p.w_m, p.w_cm, p.w_fuse});
  auto scope = g.scope("cell");
  using namespace ops;

  const auto xs = split_channels(conv2d_same(x, g.param(*p.w_x), g.param(*p.b)), 7);
  const auto hs4 = split_channels(conv2d_same(h_prev, g.param(*p.w_h)), 4);
  const auto ms3 = split_channels(conv2d_same(m_in, g.param(*p.w_m)), 3);

  const Var<T> f = sigmoid(add(xs[0], hs4[0]));
  const Var<T> i = sigmoid(add(xs[1], hs4[1]));
  const Var<T> c_hat = tanh(add(xs[2], hs4[2]));
  const Var<T> c = add(mul(f, c_prev), mul(i, c_hat));

  const Var<T> f2 = sigmoid(add(xs[3], ms3[0]));
  const Var<T> i2 = sigmoid(add(xs[4], ms3[1]));
  const Var<T> m_hat = tanh(add(xs[5], ms3[2]));
  const Var<T> m = add(mul(f2, m_in), mul(i2, m_hat));

  const Var<T> cm = concat_channels<T>({c, m});
  const Var<T> o = sigmoid(add(xs[6], hs4[3], conv2d_same(cm, g.param(*p.w_cm))));
  const Var<T> h = mul(o, tanh(conv2d_same(cm, g.param(*p.w_fuse))));
  return {h, c, m};
}

}  // namespace gmg
