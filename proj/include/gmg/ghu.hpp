#pragma once

#include <string>

#include "gmg/conv.hpp"
#include "gmg/init.hpp"

namespace gmg {

/// Gradient highway unit: a gated skip path whose state Z spans time steps.
///   P = tanh(W_px x + W_pz Z), S = sigmoid(W_sx x + W_sz Z), Z' = S o P + (1 - S) o Z
template <class T>
struct GhuParams {
  Parameter<T>* w_x = nullptr;  // [P; S] from x
  Parameter<T>* b = nullptr;
  Parameter<T>* w_z = nullptr;  // [P; S] from Z
  int channels = 0;

  static GhuParams create(ParameterSet<T>& set, const std::string& prefix, int channels, int kernel) {
    if (kernel % 2 == 0) throw ConfigError("GHU kernel must be odd");
    GhuParams p;
    p.channels = channels;
    p.w_x = &set.add(prefix + "w_x", {2 * channels, channels, kernel, kernel});
    p.b = &set.add(prefix + "b", {2 * channels});
    p.w_z = &set.add(prefix + "w_z", {2 * channels, channels, kernel, kernel});
    return p;
  }

  void init(Rng& rng) const {
    init_kernel(*w_x, rng);
    init_kernel(*w_z, rng);
    b->value.fill(T(0));
  }
};

template <class T>
Var<T> ghu_step(Graph<T>& g, const GhuParams<T>& p, const Var<T>& x, const Var<T>& z_prev) {
  using namespace ops;
  gmg::detail::require(x.shape() == z_prev.shape(), "ghu_step: input " + shape_str(x.shape()) + " vs state " + shape_str(z_prev.shape()));
  auto scope = g.scope("ghu");
  const Var<T> pre = add(conv2d_same(x, g.param(*p.w_x), g.param(*p.b)), conv2d_same(z_prev, g.param(*p.w_z)));
  const Var<T> cand = tanh(slice_channels(pre, 0, p.channels));
  const Var<T> gate = sigmoid(slice_channels(pre, p.channels, p.channels));
  return blend(cand, z_prev, gate);
}

}  // namespace gmg
