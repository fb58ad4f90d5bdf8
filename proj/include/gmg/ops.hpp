#pragma once

#include <cmath>
#include <vector>

#include "gmg/autograd.hpp"

namespace gmg::ops {

namespace detail {

using gmg::detail::require;

template <class T>
void same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  require(a.shape() == b.shape(),
          std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
}

}  // namespace detail

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  detail::same_shape(a, b, "add");
  Tensor<T> y = a.value();
  y += b.value();
  const auto ia = a.id(), ib = b.id();
  return a.graph().record(std::move(y), {a, b}, [ia, ib](Graph<T>& g, const Tensor<T>& go) {
    if (g.requires_grad(ia)) g.grad(ia) += go;
    if (g.requires_grad(ib)) g.grad(ib) += go;
  }, "add");
}

template <class T>
Var<T> add(const Var<T>& a, const Var<T>& b, const Var<T>& c) {
  return add(add(a, b), c);
}

template <class T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  detail::same_shape(a, b, "sub");
  const Tensor<T>& x = a.value();
  const Tensor<T>& z = b.value();
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] - z[i];
  const auto ia = a.id(), ib = b.id();
  return a.graph().record(std::move(y), {a, b}, [ia, ib](Graph<T>& g, const Tensor<T>& go) {
    if (g.requires_grad(ia)) g.grad(ia) += go;
    if (g.requires_grad(ib)) {
      Tensor<T>& gb = g.grad(ib);
      for (std::size_t i = 0; i < go.size(); ++i) gb[i] -= go[i];
    }
  }, "sub");
}

/// Hadamard product.
template <class T>
Var<T> mul(const Var<T>& a, const Var<T>& b) {
  detail::same_shape(a, b, "mul");
  const Tensor<T>& x = a.value();
  const Tensor<T>& z = b.value();
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] * z[i];
  const auto ia = a.id(), ib = b.id();
  return a.graph().record(std::move(y), {a, b}, [ia, ib](Graph<T>& g, const Tensor<T>& go) {
    const Tensor<T>& x = g.value(ia);
    const Tensor<T>& z = g.value(ib);
    if (g.requires_grad(ia)) {
      Tensor<T>& ga = g.grad(ia);
      for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * z[i];
    }
    if (g.requires_grad(ib)) {
      Tensor<T>& gb = g.grad(ib);
      for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i] * x[i];
    }
  }, "mul");
}

/// s * a + c for scalars s, c.
template <class T>
Var<T> affine(const Var<T>& a, T s, T c = T(0)) {
  const Tensor<T>& x = a.value();
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = s * x[i] + c;
  const auto ia = a.id();
  return a.graph().record(std::move(y), {a}, [ia, s](Graph<T>& g, const Tensor<T>& go) {
    Tensor<T>& ga = g.grad(ia);
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += s * go[i];
  }, "affine");
}

template <class T>
Var<T> scale(const Var<T>& a, T s) {
  return affine(a, s);
}

template <class T>
Var<T> one_minus(const Var<T>& a) {
  return affine(a, T(-1), T(1));
}

/// a*g + b*(1-g): convex blend used by every gate in the model. The result is clamped
/// to [min(a, b), max(a, b)], which only ever moves it by rounding.
template <class T>
Var<T> blend(const Var<T>& a, const Var<T>& b, const Var<T>& gate) {
  detail::same_shape(a, b, "blend");
  detail::same_shape(a, gate, "blend");
  const Tensor<T>& x = a.value();
  const Tensor<T>& z = b.value();
  const Tensor<T>& s = gate.value();
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < y.size(); ++i)
    y[i] = std::clamp(x[i] * s[i] + z[i] * (T(1) - s[i]), std::min(x[i], z[i]), std::max(x[i], z[i]));
  const auto ia = a.id(), ib = b.id(), is = gate.id();
  return a.graph().record(std::move(y), {a, b, gate}, [ia, ib, is](Graph<T>& g, const Tensor<T>& go) {
    const Tensor<T>& x = g.value(ia);
    const Tensor<T>& z = g.value(ib);
    const Tensor<T>& s = g.value(is);
    if (g.requires_grad(ia)) {
      Tensor<T>& ga = g.grad(ia);
      for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * s[i];
    }
    if (g.requires_grad(ib)) {
      Tensor<T>& gb = g.grad(ib);
      for (std::size_t i = 0; i < go.size(); ++i) gb[i] += go[i] * (T(1) - s[i]);
    }
    if (g.requires_grad(is)) {
      Tensor<T>& gs = g.grad(is);
      for (std::size_t i = 0; i < go.size(); ++i) gs[i] += go[i] * (x[i] - z[i]);
    }
  }, "blend");
}

template <class T>
T sigmoid_scalar(T x) {
  if (x >= T(0)) {
    const T e = std::exp(-x);
    return T(1) / (T(1) + e);
  }
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <class T>
Var<T> sigmoid(const Var<T>& a) {
  const Tensor<T>& x = a.value();
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = sigmoid_scalar(x[i]);
  const auto ia = a.id();
  const auto io = a.graph().next_id();
  return a.graph().record(std::move(y), {a}, [ia, io](Graph<T>& g, const Tensor<T>& go) {
    const Tensor<T>& s = g.value(io);
    Tensor<T>& ga = g.grad(ia);
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * s[i] * (T(1) - s[i]);
  }, "sigmoid");
}

template <class T>
Var<T> tanh(const Var<T>& a) {
  const Tensor<T>& x = a.value();
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::tanh(x[i]);
  const auto ia = a.id();
  const auto io = a.graph().next_id();
  return a.graph().record(std::move(y), {a}, [ia, io](Graph<T>& g, const Tensor<T>& go) {
    const Tensor<T>& s = g.value(io);
    Tensor<T>& ga = g.grad(ia);
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * (T(1) - s[i] * s[i]);
  }, "tanh");
}

template <class T>
Var<T> relu(const Var<T>& a) {
  const Tensor<T>& x = a.value();
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
  const auto ia = a.id();
  return a.graph().record(std::move(y), {a}, [ia](Graph<T>& g, const Tensor<T>& go) {
    const Tensor<T>& x = g.value(ia);
    Tensor<T>& ga = g.grad(ia);
    for (std::size_t i = 0; i < go.size(); ++i)
      if (x[i] > T(0)) ga[i] += go[i];
  }, "relu");
}

template <class T>
Var<T> exp(const Var<T>& a) {
  const Tensor<T>& x = a.value();
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = std::exp(x[i]);
  const auto ia = a.id();
  const auto io = a.graph().next_id();
  return a.graph().record(std::move(y), {a}, [ia, io](Graph<T>& g, const Tensor<T>& go) {
    const Tensor<T>& s = g.value(io);
    Tensor<T>& ga = g.grad(ia);
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i] * s[i];
  }, "exp");
}

/// Concatenate rank-4 tensors along channels (axis 1).
template <class T>
Var<T> concat_channels(const std::vector<Var<T>>& parts) {
  detail::require(!parts.empty(), "concat_channels: no inputs");
  const Shape& s0 = parts.front().shape();
  detail::require(s0.size() == 4, "concat_channels expects rank-4 inputs");
  const int B = s0[0], H = s0[2], W = s0[3];
  int C = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    detail::require(s.size() == 4 && s[0] == B && s[2] == H && s[3] == W,
                    "concat_channels: incompatible shape " + shape_str(s) + " vs " + shape_str(s0));
    C += s[1];
  }
  const std::size_t hw = static_cast<std::size_t>(H) * W;
  Tensor<T> y({B, C, H, W});
  std::vector<std::size_t> ids;
  std::vector<int> widths;
  for (int b = 0; b < B; ++b) {
    int c0 = 0;
    for (const auto& p : parts) {
      const int pc = p.dim(1);
      std::copy_n(p.value().data() + static_cast<std::size_t>(b) * pc * hw, pc * hw, y.data() + (static_cast<std::size_t>(b) * C + c0) * hw);
      c0 += pc;
    }
  }
  for (const auto& p : parts) {
    ids.push_back(p.id());
    widths.push_back(p.dim(1));
  }
  Graph<T>& graph = parts.front().graph();
  return graph.record(std::move(y), parts, [ids, widths, B, C, hw](Graph<T>& g, const Tensor<T>& go) {
    int c0 = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const int pc = widths[k];
      if (g.requires_grad(ids[k])) {
        Tensor<T>& gp = g.grad(ids[k]);
        for (int b = 0; b < B; ++b) {
          const T* src = go.data() + (static_cast<std::size_t>(b) * C + c0) * hw;
          T* dst = gp.data() + static_cast<std::size_t>(b) * pc * hw;
          for (std::size_t i = 0; i < pc * hw; ++i) dst[i] += src[i];
        }
      }
      c0 += pc;
    }
  }, "concat");
}

/// Channels [c0, c0+n) of a rank-4 tensor.
template <class T>
Var<T> slice_channels(const Var<T>& a, int c0, int n) {
  const Shape& s = a.shape();
  detail::require(s.size() == 4 && c0 >= 0 && n > 0 && c0 + n <= s[1], "slice_channels: range out of bounds");
  const int B = s[0], C = s[1];
  const std::size_t hw = static_cast<std::size_t>(s[2]) * s[3];
  Tensor<T> y({B, n, s[2], s[3]});
  for (int b = 0; b < B; ++b)
    std::copy_n(a.value().data() + (static_cast<std::size_t>(b) * C + c0) * hw, n * hw, y.data() + static_cast<std::size_t>(b) * n * hw);
  const auto ia = a.id();
  return a.graph().record(std::move(y), {a}, [ia, B, C, c0, n, hw](Graph<T>& g, const Tensor<T>& go) {
    Tensor<T>& ga = g.grad(ia);
    for (int b = 0; b < B; ++b) {
      const T* src = go.data() + static_cast<std::size_t>(b) * n * hw;
      T* dst = ga.data() + (static_cast<std::size_t>(b) * C + c0) * hw;
      for (std::size_t i = 0; i < n * hw; ++i) dst[i] += src[i];
    }
  }, "slice");
}

template <class T>
std::vector<Var<T>> split_channels(const Var<T>& a, int parts) {
  detail::require(parts > 0 && a.dim(1) % parts == 0, "split_channels: channels not divisible");
  const int n = a.dim(1) / parts;
  std::vector<Var<T>> out;
  for (int k = 0; k < parts; ++k) out.push_back(slice_channels(a, k * n, n));
  return out;
}

/// Range of input rows/cols covered by adaptive-pool output cell i.
inline std::pair<int, int> adaptive_range(int i, int in, int out) {
  const int start = (i * in) / out;
  const int end = ((i + 1) * in + out - 1) / out;
  return {start, end};
}

/// Adaptive average pooling of B x C x H x W to B x C x oh x ow.
template <class T>
Var<T> adaptive_avg_pool(const Var<T>& a, int oh, int ow) {
  const Shape& s = a.shape();
  detail::require(s.size() == 4, "adaptive_avg_pool expects rank-4 input");
  const int B = s[0], C = s[1], H = s[2], W = s[3];
  detail::require(oh >= 1 && ow >= 1 && oh <= H && ow <= W,
                  "adaptive_avg_pool: output " + std::to_string(oh) + "x" + std::to_string(ow) + " exceeds input " + shape_str(s));
  Tensor<T> y({B, C, oh, ow});
  const Tensor<T>& x = a.value();
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < C; ++c)
      for (int i = 0; i < oh; ++i) {
        const auto [h0, h1] = adaptive_range(i, H, oh);
        for (int j = 0; j < ow; ++j) {
          const auto [w0, w1] = adaptive_range(j, W, ow);
          T acc = 0;
          for (int h = h0; h < h1; ++h)
            for (int w = w0; w < w1; ++w) acc += x.at(b, c, h, w);
          y.at(b, c, i, j) = acc / static_cast<T>((h1 - h0) * (w1 - w0));
        }
      }
  const auto ia = a.id();
  return a.graph().record(std::move(y), {a}, [ia, B, C, H, W, oh, ow](Graph<T>& g, const Tensor<T>& go) {
    Tensor<T>& ga = g.grad(ia);
    for (int b = 0; b < B; ++b)
      for (int c = 0; c < C; ++c)
        for (int i = 0; i < oh; ++i) {
          const auto [h0, h1] = adaptive_range(i, H, oh);
          for (int j = 0; j < ow; ++j) {
            const auto [w0, w1] = adaptive_range(j, W, ow);
            const T share = go.at(b, c, i, j) / static_cast<T>((h1 - h0) * (w1 - w0));
            for (int h = h0; h < h1; ++h)
              for (int w = w0; w < w1; ++w) ga.at(b, c, h, w) += share;
          }
        }
  }, "adaptive_avg_pool");
}

/// Global average over H x W: B x C x H x W -> B x C.
template <class T>
Var<T> global_avg_pool(const Var<T>& a) {
  const Shape& s = a.shape();
  detail::require(s.size() == 4, "global_avg_pool expects rank-4 input");
  const int B = s[0], C = s[1];
  const std::size_t hw = static_cast<std::size_t>(s[2]) * s[3];
  Tensor<T> y({B, C});
  const T* x = a.value().data();
  for (int bc = 0; bc < B * C; ++bc) {
    T acc = 0;
    for (std::size_t i = 0; i < hw; ++i) acc += x[bc * hw + i];
    y[bc] = acc / static_cast<T>(hw);
  }
  const auto ia = a.id();
  return a.graph().record(std::move(y), {a}, [ia, B, C, hw](Graph<T>& g, const Tensor<T>& go) {
    Tensor<T>& ga = g.grad(ia);
    for (int bc = 0; bc < B * C; ++bc) {
      const T share = go[bc] / static_cast<T>(hw);
      for (std::size_t i = 0; i < hw; ++i) ga[bc * hw + i] += share;
    }
  }, "global_avg_pool");
}

/// Broadcast B x C to B x C x H x W.
template <class T>
Var<T> broadcast_spatial(const Var<T>& a, int H, int W) {
  const Shape& s = a.shape();
  detail::require(s.size() == 2, "broadcast_spatial expects B x C");
  const int BC = s[0] * s[1];
  const std::size_t hw = static_cast<std::size_t>(H) * W;
  Tensor<T> y({s[0], s[1], H, W});
  for (int bc = 0; bc < BC; ++bc) std::fill_n(y.data() + bc * hw, hw, a.value()[bc]);
  const auto ia = a.id();
  return a.graph().record(std::move(y), {a}, [ia, BC, hw](Graph<T>& g, const Tensor<T>& go) {
    Tensor<T>& ga = g.grad(ia);
    for (int bc = 0; bc < BC; ++bc) {
      T acc = 0;
      for (std::size_t i = 0; i < hw; ++i) acc += go[bc * hw + i];
      ga[bc] += acc;
    }
  }, "broadcast_spatial");
}

/// x (B x C x H x W) scaled per (batch, channel) by v (B x C).
template <class T>
Var<T> mul_channelwise(const Var<T>& x, const Var<T>& v) {
  const Shape& s = x.shape();
  detail::require(s.size() == 4 && v.shape() == Shape{s[0], s[1]},
                  "mul_channelwise: expected B x C factors for " + shape_str(s) + ", got " + shape_str(v.shape()));
  const int BC = s[0] * s[1];
  const std::size_t hw = static_cast<std::size_t>(s[2]) * s[3];
  Tensor<T> y(s);
  for (int bc = 0; bc < BC; ++bc) {
    const T f = v.value()[bc];
    for (std::size_t i = 0; i < hw; ++i) y[bc * hw + i] = x.value()[bc * hw + i] * f;
  }
  const auto ix = x.id(), iv = v.id();
  return x.graph().record(std::move(y), {x, v}, [ix, iv, BC, hw](Graph<T>& g, const Tensor<T>& go) {
    const Tensor<T>& xv = g.value(ix);
    const Tensor<T>& vv = g.value(iv);
    if (g.requires_grad(ix)) {
      Tensor<T>& gx = g.grad(ix);
      for (int bc = 0; bc < BC; ++bc)
        for (std::size_t i = 0; i < hw; ++i) gx[bc * hw + i] += go[bc * hw + i] * vv[bc];
    }
    if (g.requires_grad(iv)) {
      Tensor<T>& gv = g.grad(iv);
      for (int bc = 0; bc < BC; ++bc) {
        T acc = 0;
        for (std::size_t i = 0; i < hw; ++i) acc += go[bc * hw + i] * xv[bc * hw + i];
        gv[bc] += acc;
      }
    }
  }, "mul_channelwise");
}

/// Broadcast a per-channel vector (C) across the batch: C -> B x C.
template <class T>
Var<T> repeat_batch(const Var<T>& v, int B) {
  detail::require(v.shape().size() == 1, "repeat_batch expects a vector");
  const int C = v.dim(0);
  Tensor<T> y({B, C});
  for (int b = 0; b < B; ++b) std::copy_n(v.value().data(), C, y.data() + b * C);
  const auto iv = v.id();
  return v.graph().record(std::move(y), {v}, [iv, B, C](Graph<T>& g, const Tensor<T>& go) {
    Tensor<T>& gv = g.grad(iv);
    for (int b = 0; b < B; ++b)
      for (int c = 0; c < C; ++c) gv[c] += go[b * C + c];
  }, "repeat_batch");
}

/// Columns [c0, c0+n) of a B x C matrix.
template <class T>
Var<T> slice_cols(const Var<T>& a, int c0, int n) {
  const Shape& s = a.shape();
  detail::require(s.size() == 2 && c0 >= 0 && c0 + n <= s[1], "slice_cols: range out of bounds");
  const int B = s[0], C = s[1];
  Tensor<T> y({B, n});
  for (int b = 0; b < B; ++b) std::copy_n(a.value().data() + b * C + c0, n, y.data() + b * n);
  const auto ia = a.id();
  return a.graph().record(std::move(y), {a}, [ia, B, C, c0, n](Graph<T>& g, const Tensor<T>& go) {
    Tensor<T>& ga = g.grad(ia);
    for (int b = 0; b < B; ++b)
      for (int j = 0; j < n; ++j) ga[b * C + c0 + j] += go[b * n + j];
  }, "slice_cols");
}

/// y = x W^T + b, x: B x In, W: Out x In, b: Out.
template <class T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  detail::require(xs.size() == 2 && ws.size() == 2 && xs[1] == ws[1] && b.shape() == Shape{ws[0]},
                  "linear: incompatible shapes " + shape_str(xs) + " " + shape_str(ws));
  const int B = xs[0], In = xs[1], Out = ws[0];
  Tensor<T> y({B, Out});
  for (int n = 0; n < B; ++n)
    for (int o = 0; o < Out; ++o) {
      T acc = b.value()[o];
      for (int i = 0; i < In; ++i) acc += x.value()[n * In + i] * w.value()[o * In + i];
      y[n * Out + o] = acc;
    }
  x.graph().add_flops(2.0 * B * In * Out);
  const auto ix = x.id(), iw = w.id(), ib = b.id();
  return x.graph().record(std::move(y), {x, w, b}, [ix, iw, ib, B, In, Out](Graph<T>& g, const Tensor<T>& go) {
    const Tensor<T>& xv = g.value(ix);
    const Tensor<T>& wv = g.value(iw);
    if (g.requires_grad(ix)) {
      Tensor<T>& gx = g.grad(ix);
      for (int n = 0; n < B; ++n)
        for (int o = 0; o < Out; ++o)
          for (int i = 0; i < In; ++i) gx[n * In + i] += go[n * Out + o] * wv[o * In + i];
    }
    if (g.requires_grad(iw)) {
      Tensor<T>& gw = g.grad(iw);
      for (int n = 0; n < B; ++n)
        for (int o = 0; o < Out; ++o)
          for (int i = 0; i < In; ++i) gw[o * In + i] += go[n * Out + o] * xv[n * In + i];
    }
    if (g.requires_grad(ib)) {
      Tensor<T>& gb = g.grad(ib);
      for (int n = 0; n < B; ++n)
        for (int o = 0; o < Out; ++o) gb[o] += go[n * Out + o];
    }
  }, "linear");
}

template <class T>
Var<T> reshape(const Var<T>& a, Shape shape) {
  detail::require(shape_size(shape) == a.value().size(),
                  "reshape " + shape_str(a.shape()) + " -> " + shape_str(shape));
  const auto ia = a.id();
  return a.graph().record(a.value().reshaped(std::move(shape)), {a}, [ia](Graph<T>& g, const Tensor<T>& go) {
    Tensor<T>& ga = g.grad(ia);
    for (std::size_t i = 0; i < go.size(); ++i) ga[i] += go[i];
  }, "reshape");
}

/// Sum of squared differences, the L2 objective.
template <class T>
Var<T> sum_squared_error(const Var<T>& pred, const Tensor<T>& target) {
  detail::require(pred.shape() == target.shape(),
                  "sum_squared_error: shape mismatch " + shape_str(pred.shape()) + " vs " + shape_str(target.shape()));
  T acc = 0;
  for (std::size_t i = 0; i < target.size(); ++i) {
    const T d = pred.value()[i] - target[i];
    acc += d * d;
  }
  const auto ip = pred.id();
  return pred.graph().record(Tensor<T>({1}, {acc}), {pred}, [ip, target](Graph<T>& g, const Tensor<T>& go) {
    const Tensor<T>& p = g.value(ip);
    Tensor<T>& gp = g.grad(ip);
    for (std::size_t i = 0; i < p.size(); ++i) gp[i] += T(2) * (p[i] - target[i]) * go[0];
  }, "sum_squared_error");
}

template <class T>
Var<T> sum(const Var<T>& a) {
  T acc = 0;
  for (T v : a.value().values()) acc += v;
  const auto ia = a.id();
  return a.graph().record(Tensor<T>({1}, {acc}), {a}, [ia](Graph<T>& g, const Tensor<T>& go) {
    Tensor<T>& ga = g.grad(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += go[0];
  }, "sum");
}

/// Weighted sum of all elements: sum_i w_i a_i, used as a random probe in gradient checks.
template <class T>
Var<T> dot_with(const Var<T>& a, const Tensor<T>& w) {
  detail::require(a.shape() == w.shape(), "dot_with: shape mismatch");
  T acc = 0;
  for (std::size_t i = 0; i < w.size(); ++i) acc += a.value()[i] * w[i];
  const auto ia = a.id();
  return a.graph().record(Tensor<T>({1}, {acc}), {a}, [ia, w](Graph<T>& g, const Tensor<T>& go) {
    Tensor<T>& ga = g.grad(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += w[i] * go[0];
  }, "dot_with");
}

template <class T>
Var<T> add_scalars(const std::vector<Var<T>>& terms) {
  detail::require(!terms.empty(), "add_scalars: no terms");
  Var<T> acc = terms.front();
  for (std::size_t i = 1; i < terms.size(); ++i) acc = add(acc, terms[i]);
  return acc;
}

}  // namespace gmg::ops
