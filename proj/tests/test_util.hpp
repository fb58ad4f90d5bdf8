#pragma once

#include <cmath>
#include <string>

#include "gmg/autograd.hpp"
#include "gmg/random.hpp"
#include "gmg/tensor.hpp"

namespace gmg::testing {

/// Registers a random tensor as a parameter so gradient checks cover input paths too.
inline Parameter<double>& random_input(ParameterSet<double>& set, const std::string& name, Shape shape, Rng& rng,
                                       double lo = -1.0, double hi = 1.0) {
  Parameter<double>& p = set.add(name, shape);
  p.value = uniform_tensor<double>(std::move(shape), rng, lo, hi);
  return p;
}

inline void randomize(ParameterSet<double>& set, Rng& rng, double scale = 0.5) {
  for (auto& p : set)
    for (auto& v : p->value.values()) v = rng.uniform(-scale, scale);
}


/// Direct-loop convolution (NCHW, OIHW), independent of the im2col path.
inline Tensor<double> naive_conv(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>* bias, int stride, int pad) {
  const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
  const int O = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  const int Ho = (H + 2 * pad - kh) / stride + 1, Wo = (W + 2 * pad - kw) / stride + 1;
  Tensor<double> y({B, O, Ho, Wo});
  for (int b = 0; b < B; ++b)
    for (int o = 0; o < O; ++o)
      for (int oy = 0; oy < Ho; ++oy)
        for (int ox = 0; ox < Wo; ++ox) {
          double s = bias ? (*bias)[o] : 0.0;
          for (int c = 0; c < C; ++c)
            for (int i = 0; i < kh; ++i)
              for (int j = 0; j < kw; ++j) {
                const int iy = oy * stride - pad + i, ix = ox * stride - pad + j;
                if (iy < 0 || iy >= H || ix < 0 || ix >= W) continue;
                s += w.at(o, c, i, j) * x.at(b, c, iy, ix);
              }
          y.at(b, o, oy, ox) = s;
        }
  return y;
}

inline Tensor<double> naive_conv_same(const Tensor<double>& x, const Tensor<double>& w, const Tensor<double>* bias = nullptr) {
  return naive_conv(x, w, bias, 1, w.dim(2) / 2);
}

/// Channels [c0, c0 + n) of a B x C x H x W tensor.
inline Tensor<double> channels_of(const Tensor<double>& x, int c0, int n) {
  Tensor<double> y({x.dim(0), n, x.dim(2), x.dim(3)});
  for (int b = 0; b < x.dim(0); ++b)
    for (int c = 0; c < n; ++c)
      for (int i = 0; i < x.dim(2); ++i)
        for (int j = 0; j < x.dim(3); ++j) y.at(b, c, i, j) = x.at(b, c0 + c, i, j);
  return y;
}

inline double sigm(double v) { return 1.0 / (1.0 + std::exp(-v)); }

}  // namespace gmg::testing
