#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <memory>

#include "gmg/ops.hpp"

namespace gmg::ops {

template <class T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <class T>
using MatMap = Eigen::Map<RowMat<T>>;
template <class T>
using ConstMatMap = Eigen::Map<const RowMat<T>>;

/// Sliding-window geometry shared by the dense, transposed and deformable kernels.
struct ConvGeom {
  int batch = 1, channels = 1, in_h = 1, in_w = 1;
  int kh = 1, kw = 1, stride = 1, pad = 0;
  int out_h = 1, out_w = 1;

  static ConvGeom make(int B, int C, int H, int W, int kh, int kw, int stride, int pad) {
    ConvGeom g{B, C, H, W, kh, kw, stride, pad, 0, 0};
    g.out_h = (H + 2 * pad - kh) / stride + 1;
    g.out_w = (W + 2 * pad - kw) / stride + 1;
    gmg::detail::require(g.out_h > 0 && g.out_w > 0, "convolution window larger than padded input");
    return g;
  }
  int rows() const { return channels * kh * kw; }
  int cols() const { return batch * out_h * out_w; }
  int out_hw() const { return out_h * out_w; }
};

/// Unfolds B x C x H x W into a (C*kh*kw) x (B*oh*ow) patch matrix.
template <class T>
void im2col(const T* x, const ConvGeom& g, T* col) {
  const int N = g.cols();
  for (int c = 0; c < g.channels; ++c)
    for (int ky = 0; ky < g.kh; ++ky)
      for (int kx = 0; kx < g.kw; ++kx) {
        T* row = col + static_cast<std::size_t>((c * g.kh + ky) * g.kw + kx) * N;
        for (int b = 0; b < g.batch; ++b) {
          const T* img = x + (static_cast<std::size_t>(b) * g.channels + c) * g.in_h * g.in_w;
          T* dst = row + static_cast<std::size_t>(b) * g.out_hw();
          for (int oy = 0; oy < g.out_h; ++oy) {
            const int iy = oy * g.stride - g.pad + ky;
            for (int ox = 0; ox < g.out_w; ++ox) {
              const int ix = ox * g.stride - g.pad + kx;
              dst[oy * g.out_w + ox] =
                  (iy >= 0 && iy < g.in_h && ix >= 0 && ix < g.in_w) ? img[iy * g.in_w + ix] : T(0);
            }
          }
        }
      }
}

/// Adjoint of im2col: accumulates patch-matrix entries back into the image.
template <class T>
void col2im(const T* col, const ConvGeom& g, T* x) {
  const int N = g.cols();
  for (int c = 0; c < g.channels; ++c)
    for (int ky = 0; ky < g.kh; ++ky)
      for (int kx = 0; kx < g.kw; ++kx) {
        const T* row = col + static_cast<std::size_t>((c * g.kh + ky) * g.kw + kx) * N;
        for (int b = 0; b < g.batch; ++b) {
          T* img = x + (static_cast<std::size_t>(b) * g.channels + c) * g.in_h * g.in_w;
          const T* src = row + static_cast<std::size_t>(b) * g.out_hw();
          for (int oy = 0; oy < g.out_h; ++oy) {
            const int iy = oy * g.stride - g.pad + ky;
            if (iy < 0 || iy >= g.in_h) continue;
            for (int ox = 0; ox < g.out_w; ++ox) {
              const int ix = ox * g.stride - g.pad + kx;
              if (ix >= 0 && ix < g.in_w) img[iy * g.in_w + ix] += src[oy * g.out_w + ox];
            }
          }
        }
      }
}

namespace detail {

/// B x C x HW  ->  C x (B*HW)
template <class T>
void to_channel_major(const T* src, int B, int C, int hw, T* dst) {
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < C; ++c)
      std::copy_n(src + (static_cast<std::size_t>(b) * C + c) * hw, hw, dst + static_cast<std::size_t>(c) * B * hw + b * hw);
}

/// C x (B*HW)  ->  B x C x HW (accumulating when `add`)
template <class T>
void from_channel_major(const T* src, int B, int C, int hw, T* dst, bool add) {
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < C; ++c) {
      const T* s = src + static_cast<std::size_t>(c) * B * hw + b * hw;
      T* d = dst + (static_cast<std::size_t>(b) * C + c) * hw;
      if (add)
        for (int i = 0; i < hw; ++i) d[i] += s[i];
      else
        std::copy_n(s, hw, d);
    }
}

template <class T>
void add_bias(Tensor<T>& y, const Tensor<T>& bias) {
  const int B = y.dim(0), C = y.dim(1);
  const std::size_t hw = static_cast<std::size_t>(y.dim(2)) * y.dim(3);
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < C; ++c) {
      T* d = y.data() + (static_cast<std::size_t>(b) * C + c) * hw;
      for (std::size_t i = 0; i < hw; ++i) d[i] += bias[c];
    }
}

template <class T>
void bias_grad(const Tensor<T>& go, Tensor<T>& gb) {
  const int B = go.dim(0), C = go.dim(1);
  const std::size_t hw = static_cast<std::size_t>(go.dim(2)) * go.dim(3);
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < C; ++c) {
      const T* s = go.data() + (static_cast<std::size_t>(b) * C + c) * hw;
      T acc = 0;
      for (std::size_t i = 0; i < hw; ++i) acc += s[i];
      gb[c] += acc;
    }
}

}  // namespace detail

/// 2-D cross-correlation. x: B x Cin x H x W, w: Cout x Cin x kh x kw, optional bias: Cout.
template <class T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& bias, int stride, int pad) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  gmg::detail::require(xs.size() == 4 && ws.size() == 4 && ws[1] == xs[1],
                       "conv2d: input " + shape_str(xs) + " incompatible with kernel " + shape_str(ws));
  if (bias.valid()) gmg::detail::require(bias.shape() == Shape{ws[0]}, "conv2d: bias must have Cout entries");
  const ConvGeom g = ConvGeom::make(xs[0], xs[1], xs[2], xs[3], ws[2], ws[3], stride, pad);
  const int Cout = ws[0], K = g.rows(), N = g.cols();

  RowMat<T> col(K, N);
  im2col(x.value().data(), g, col.data());
  RowMat<T> Y(Cout, N);
  Y.noalias() = ConstMatMap<T>(w.value().data(), Cout, K) * col;
  Tensor<T> y({g.batch, Cout, g.out_h, g.out_w});
  detail::from_channel_major(Y.data(), g.batch, Cout, g.out_hw(), y.data(), false);
  if (bias.valid()) detail::add_bias(y, bias.value());
  x.graph().add_flops(2.0 * K * Cout * N);

  const auto ix = x.id(), iw = w.id();
  const bool has_bias = bias.valid();
  const auto ib = has_bias ? bias.id() : 0;
  std::vector<Var<T>> parents{x, w};
  if (has_bias) parents.push_back(bias);
  return x.graph().record(std::move(y), parents, [ix, iw, ib, has_bias, g, Cout](Graph<T>& gr, const Tensor<T>& go) {
    const int K = g.rows(), N = g.cols();
    RowMat<T> dY(Cout, N);
    detail::to_channel_major(go.data(), g.batch, Cout, g.out_hw(), dY.data());
    if (gr.requires_grad(iw)) {
      RowMat<T> col(K, N);
      im2col(gr.value(ix).data(), g, col.data());
      MatMap<T>(gr.grad(iw).data(), Cout, K).noalias() += dY * col.transpose();
    }
    if (gr.requires_grad(ix)) {
      RowMat<T> dcol(K, N);
      dcol.noalias() = ConstMatMap<T>(gr.value(iw).data(), Cout, K).transpose() * dY;
      col2im(dcol.data(), g, gr.grad(ix).data());
    }
    if (has_bias && gr.requires_grad(ib)) detail::bias_grad(go, gr.grad(ib));
  }, "conv2d");
}

template <class T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, int stride, int pad) {
  return conv2d(x, w, Var<T>{}, stride, pad);
}

/// Same-padded stride-1 convolution (odd kernels keep H x W).
template <class T>
Var<T> conv2d_same(const Var<T>& x, const Var<T>& w, const Var<T>& bias = Var<T>{}) {
  gmg::detail::require(w.dim(2) % 2 == 1 && w.dim(3) % 2 == 1, "conv2d_same needs odd kernels");
  return conv2d(x, w, bias, 1, w.dim(2) / 2);
}

/// Transposed convolution (the adjoint of conv2d in x).
/// x: B x Cin x H x W, w: Cin x Cout x k x k, output H' = (H-1)*stride - 2*pad + k.
template <class T>
Var<T> conv_transpose2d(const Var<T>& x, const Var<T>& w, const Var<T>& bias, int stride, int pad) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  gmg::detail::require(xs.size() == 4 && ws.size() == 4 && ws[0] == xs[1],
                       "conv_transpose2d: input " + shape_str(xs) + " incompatible with kernel " + shape_str(ws));
  const int B = xs[0], Cin = xs[1], Hi = xs[2], Wi = xs[3], Cout = ws[1], k = ws[2];
  const int Ho = (Hi - 1) * stride - 2 * pad + k, Wo = (Wi - 1) * stride - 2 * pad + ws[3];
  // Geometry of the forward conv mapping the output image back onto the input grid.
  ConvGeom g = ConvGeom::make(B, Cout, Ho, Wo, k, ws[3], stride, pad);
  gmg::detail::require(g.out_h == Hi && g.out_w == Wi, "conv_transpose2d: inconsistent geometry");
  const int K = g.rows(), N = g.cols();

  RowMat<T> X(Cin, N);
  detail::to_channel_major(x.value().data(), B, Cin, Hi * Wi, X.data());
  RowMat<T> col(K, N);
  col.noalias() = ConstMatMap<T>(w.value().data(), Cin, K).transpose() * X;
  Tensor<T> y({B, Cout, Ho, Wo});
  col2im(col.data(), g, y.data());
  if (bias.valid()) detail::add_bias(y, bias.value());
  x.graph().add_flops(2.0 * K * Cin * N);

  const auto ix = x.id(), iw = w.id();
  const bool has_bias = bias.valid();
  const auto ib = has_bias ? bias.id() : 0;
  std::vector<Var<T>> parents{x, w};
  if (has_bias) parents.push_back(bias);
  return x.graph().record(std::move(y), parents, [ix, iw, ib, has_bias, g, Cin](Graph<T>& gr, const Tensor<T>& go) {
    const int K = g.rows(), N = g.cols();
    RowMat<T> dcol(K, N);
    im2col(go.data(), g, dcol.data());
    if (gr.requires_grad(ix)) {
      RowMat<T> dX(Cin, N);
      dX.noalias() = ConstMatMap<T>(gr.value(iw).data(), Cin, K) * dcol;
      detail::from_channel_major(dX.data(), g.batch, Cin, g.out_hw(), gr.grad(ix).data(), true);
    }
    if (gr.requires_grad(iw)) {
      RowMat<T> X(Cin, N);
      detail::to_channel_major(gr.value(ix).data(), g.batch, Cin, g.out_hw(), X.data());
      MatMap<T>(gr.grad(iw).data(), Cin, K).noalias() += X * dcol.transpose();
    }
    if (has_bias && gr.requires_grad(ib)) detail::bias_grad(go, gr.grad(ib));
  }, "conv_transpose2d");
}

/// Per-channel same-padded convolution. x: B x C x H x W, w: C x 1 x k x k.
template <class T>
Var<T> depthwise_conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& bias = Var<T>{}) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  gmg::detail::require(xs.size() == 4 && ws.size() == 4 && ws[0] == xs[1] && ws[1] == 1 && ws[2] % 2 == 1 && ws[3] == ws[2],
                       "depthwise_conv2d: input " + shape_str(xs) + " incompatible with kernel " + shape_str(ws));
  const int B = xs[0], C = xs[1], H = xs[2], W = xs[3], k = ws[2], p = k / 2;
  Tensor<T> y(xs);
  const Tensor<T>& xv = x.value();
  const Tensor<T>& wv = w.value();
  for (int b = 0; b < B; ++b)
    for (int c = 0; c < C; ++c) {
      const T* img = xv.data() + (static_cast<std::size_t>(b) * C + c) * H * W;
      const T* ker = wv.data() + static_cast<std::size_t>(c) * k * k;
      T* out = y.data() + (static_cast<std::size_t>(b) * C + c) * H * W;
      const T b0 = bias.valid() ? bias.value()[c] : T(0);
      for (int oy = 0; oy < H; ++oy)
        for (int ox = 0; ox < W; ++ox) {
          T acc = b0;
          for (int ky = 0; ky < k; ++ky) {
            const int iy = oy - p + ky;
            if (iy < 0 || iy >= H) continue;
            for (int kx = 0; kx < k; ++kx) {
              const int ix = ox - p + kx;
              if (ix >= 0 && ix < W) acc += ker[ky * k + kx] * img[iy * W + ix];
            }
          }
          out[oy * W + ox] = acc;
        }
    }
  x.graph().add_flops(2.0 * B * C * H * W * k * k);
  const auto ix = x.id(), iw = w.id();
  const bool has_bias = bias.valid();
  const auto ib = has_bias ? bias.id() : 0;
  std::vector<Var<T>> parents{x, w};
  if (has_bias) parents.push_back(bias);
  return x.graph().record(std::move(y), parents, [=](Graph<T>& gr, const Tensor<T>& go) {
    const Tensor<T>& xv = gr.value(ix);
    const Tensor<T>& wv = gr.value(iw);
    const bool gx = gr.requires_grad(ix), gw = gr.requires_grad(iw);
    T* dx = gx ? gr.grad(ix).data() : nullptr;
    T* dw = gw ? gr.grad(iw).data() : nullptr;
    for (int b = 0; b < B; ++b)
      for (int c = 0; c < C; ++c) {
        const std::size_t base = (static_cast<std::size_t>(b) * C + c) * H * W;
        const T* img = xv.data() + base;
        const T* ker = wv.data() + static_cast<std::size_t>(c) * k * k;
        const T* g = go.data() + base;
        for (int oy = 0; oy < H; ++oy)
          for (int ox = 0; ox < W; ++ox) {
            const T gv = g[oy * W + ox];
            for (int ky = 0; ky < k; ++ky) {
              const int iy = oy - p + ky;
              if (iy < 0 || iy >= H) continue;
              for (int kx = 0; kx < k; ++kx) {
                const int ix2 = ox - p + kx;
                if (ix2 < 0 || ix2 >= W) continue;
                if (gx) dx[base + iy * W + ix2] += gv * ker[ky * k + kx];
                if (gw) dw[static_cast<std::size_t>(c) * k * k + ky * k + kx] += gv * img[iy * W + ix2];
              }
            }
          }
      }
    if (has_bias && gr.requires_grad(ib)) detail::bias_grad(go, gr.grad(ib));
  }, "depthwise_conv2d");
}

namespace detail {

/// Bilinear sample with zero padding outside the image.
template <class T>
struct Bilinear {
  int y0, x0;
  T ly, lx;
  T v00, v01, v10, v11;

  Bilinear(const T* img, int H, int W, T py, T px) {
    const T fy = std::floor(py), fx = std::floor(px);
    y0 = static_cast<int>(fy);
    x0 = static_cast<int>(fx);
    ly = py - fy;
    lx = px - fx;
    v00 = fetch(img, H, W, y0, x0);
    v01 = fetch(img, H, W, y0, x0 + 1);
    v10 = fetch(img, H, W, y0 + 1, x0);
    v11 = fetch(img, H, W, y0 + 1, x0 + 1);
  }
  static T fetch(const T* img, int H, int W, int y, int x) {
    return (y >= 0 && y < H && x >= 0 && x < W) ? img[y * W + x] : T(0);
  }
  T value() const {
    return (T(1) - ly) * ((T(1) - lx) * v00 + lx * v01) + ly * ((T(1) - lx) * v10 + lx * v11);
  }
  T d_dy() const { return (T(1) - lx) * (v10 - v00) + lx * (v11 - v01); }
  T d_dx() const { return (T(1) - ly) * (v01 - v00) + ly * (v11 - v10); }
  /// Scatter `g` onto the four corners (the adjoint of value()).
  void scatter(T* img, int H, int W, T g) const {
    auto put = [&](int y, int x, T wgt) {
      if (y >= 0 && y < H && x >= 0 && x < W) img[y * W + x] += g * wgt;
    };
    put(y0, x0, (T(1) - ly) * (T(1) - lx));
    put(y0, x0 + 1, (T(1) - ly) * lx);
    put(y0 + 1, x0, ly * (T(1) - lx));
    put(y0 + 1, x0 + 1, ly * lx);
  }
};

template <class T>
void deform_im2col(const T* x, const T* off, const ConvGeom& g, T* col) {
  const int N = g.cols(), taps = g.kh * g.kw, hw = g.out_hw();
  for (int c = 0; c < g.channels; ++c)
    for (int ky = 0; ky < g.kh; ++ky)
      for (int kx = 0; kx < g.kw; ++kx) {
        const int tap = ky * g.kw + kx;
        T* row = col + static_cast<std::size_t>(c * taps + tap) * N;
        for (int b = 0; b < g.batch; ++b) {
          const T* img = x + (static_cast<std::size_t>(b) * g.channels + c) * g.in_h * g.in_w;
          const T* odx = off + (static_cast<std::size_t>(b) * 2 * taps + 2 * tap) * hw;
          const T* ody = odx + hw;
          for (int oy = 0; oy < g.out_h; ++oy)
            for (int ox = 0; ox < g.out_w; ++ox) {
              const int pos = oy * g.out_w + ox;
              const T py = static_cast<T>(oy * g.stride - g.pad + ky) + ody[pos];
              const T px = static_cast<T>(ox * g.stride - g.pad + kx) + odx[pos];
              row[static_cast<std::size_t>(b) * hw + pos] = Bilinear<T>(img, g.in_h, g.in_w, py, px).value();
            }
        }
      }
}

}  // namespace detail

/// Deformable convolution with same padding and stride 1.
/// x: B x C x H x W; offsets: B x 2k^2 x H x W with channel 2*tap holding the
/// column (x) displacement of tap `tap` (row-major over the k x k window) and
/// channel 2*tap+1 its row (y) displacement, both in pixels; w: Cout x C x k x k.
template <class T>
Var<T> deform_conv2d(const Var<T>& x, const Var<T>& offsets, const Var<T>& w, const Var<T>& bias = Var<T>{}) {
  const Shape& xs = x.shape();
  const Shape& ws = w.shape();
  gmg::detail::require(xs.size() == 4 && ws.size() == 4 && ws[1] == xs[1] && ws[2] == ws[3] && ws[2] % 2 == 1,
                       "deform_conv2d: input " + shape_str(xs) + " incompatible with kernel " + shape_str(ws));
  const int k = ws[2];
  const ConvGeom g = ConvGeom::make(xs[0], xs[1], xs[2], xs[3], k, k, 1, k / 2);
  gmg::detail::require(offsets.shape() == Shape{g.batch, 2 * k * k, g.out_h, g.out_w},
                       "deform_conv2d: offsets must be " + shape_str({g.batch, 2 * k * k, g.out_h, g.out_w}) + ", got " +
                           shape_str(offsets.shape()));
  const int Cout = ws[0], K = g.rows(), N = g.cols();
  RowMat<T> col(K, N);
  detail::deform_im2col(x.value().data(), offsets.value().data(), g, col.data());
  RowMat<T> Y(Cout, N);
  Y.noalias() = ConstMatMap<T>(w.value().data(), Cout, K) * col;
  Tensor<T> y({g.batch, Cout, g.out_h, g.out_w});
  detail::from_channel_major(Y.data(), g.batch, Cout, g.out_hw(), y.data(), false);
  if (bias.valid()) detail::add_bias(y, bias.value());
  x.graph().add_flops(2.0 * K * Cout * N);

  const auto ix = x.id(), io = offsets.id(), iw = w.id();
  const bool has_bias = bias.valid();
  const auto ib = has_bias ? bias.id() : 0;
  std::vector<Var<T>> parents{x, offsets, w};
  if (has_bias) parents.push_back(bias);
  return x.graph().record(std::move(y), parents, [=](Graph<T>& gr, const Tensor<T>& go) {
    const int taps = k * k, hw = g.out_hw();
    RowMat<T> dY(Cout, N);
    detail::to_channel_major(go.data(), g.batch, Cout, hw, dY.data());
    const T* xv = gr.value(ix).data();
    const T* ov = gr.value(io).data();
    if (gr.requires_grad(iw)) {
      RowMat<T> col(K, N);
      detail::deform_im2col(xv, ov, g, col.data());
      MatMap<T>(gr.grad(iw).data(), Cout, K).noalias() += dY * col.transpose();
    }
    const bool gx = gr.requires_grad(ix), goff = gr.requires_grad(io);
    if (gx || goff) {
      RowMat<T> dcol(K, N);
      dcol.noalias() = ConstMatMap<T>(gr.value(iw).data(), Cout, K).transpose() * dY;
      T* dx = gx ? gr.grad(ix).data() : nullptr;
      T* doff = goff ? gr.grad(io).data() : nullptr;
      for (int c = 0; c < g.channels; ++c)
        for (int ky = 0; ky < k; ++ky)
          for (int kx = 0; kx < k; ++kx) {
            const int tap = ky * k + kx;
            const T* row = dcol.data() + static_cast<std::size_t>(c * taps + tap) * N;
            for (int b = 0; b < g.batch; ++b) {
              const std::size_t img_off = (static_cast<std::size_t>(b) * g.channels + c) * g.in_h * g.in_w;
              const std::size_t ox_off = (static_cast<std::size_t>(b) * 2 * taps + 2 * tap) * hw;
              for (int oy = 0; oy < g.out_h; ++oy)
                for (int oxx = 0; oxx < g.out_w; ++oxx) {
                  const int pos = oy * g.out_w + oxx;
                  const T gv = row[static_cast<std::size_t>(b) * hw + pos];
                  if (gv == T(0)) continue;
                  const T py = static_cast<T>(oy - g.pad + ky) + ov[ox_off + hw + pos];
                  const T px = static_cast<T>(oxx - g.pad + kx) + ov[ox_off + pos];
                  const detail::Bilinear<T> s(xv + img_off, g.in_h, g.in_w, py, px);
                  if (gx) s.scatter(dx + img_off, g.in_h, g.in_w, gv);
                  if (goff) {
                    doff[ox_off + pos] += gv * s.d_dx();
                    doff[ox_off + hw + pos] += gv * s.d_dy();
                  }
                }
            }
          }
    }
    if (has_bias && gr.requires_grad(ib)) detail::bias_grad(go, gr.grad(ib));
  }, "deform_conv2d");
}

/// Row-softmax of Q^T K per batch. q, k: B x d x H x W  ->  B x N x N, N = H*W.
/// Row maxima are subtracted before exponentiation.
template <class T>
Tensor<T> attention_weights(const Tensor<T>& q, const Tensor<T>& k) {
  gmg::detail::require(q.rank() == 4 && q.shape() == k.shape(), "attention_weights: query/key shape mismatch");
  const int B = q.dim(0), d = q.dim(1), N = q.dim(2) * q.dim(3);
  Tensor<T> s({B, N, N});
  for (int b = 0; b < B; ++b) {
    ConstMatMap<T> Q(q.data() + static_cast<std::size_t>(b) * d * N, d, N);
    ConstMatMap<T> K(k.data() + static_cast<std::size_t>(b) * d * N, d, N);
    MatMap<T> S(s.data() + static_cast<std::size_t>(b) * N * N, N, N);
    S.noalias() = Q.transpose() * K;
    if (!S.allFinite()) throw NumericError("attention_weights: non-finite logits");
    for (int i = 0; i < N; ++i) {
      auto r = S.row(i);
      const T m = r.maxCoeff();
      r = (r.array() - m).exp();
      r /= r.sum();
    }
  }
  return s;
}

/// Unscaled dot-product attention: z[:, i] = sum_j softmax_j(q_i . k_j) v[:, j].
/// q, k: B x d x H x W; v: B x Cv x H x W; result B x Cv x H x W.
template <class T>
Var<T> attend(const Var<T>& q, const Var<T>& k, const Var<T>& v) {
  const Shape& vs = v.shape();
  gmg::detail::require(vs.size() == 4 && vs[0] == q.dim(0) && vs[2] == q.dim(2) && vs[3] == q.dim(3),
                       "attend: value shape " + shape_str(vs) + " incompatible with query " + shape_str(q.shape()));
  const int B = vs[0], Cv = vs[1], d = q.dim(1), N = vs[2] * vs[3];
  auto S = std::make_shared<Tensor<T>>(attention_weights(q.value(), k.value()));
  Tensor<T> z(vs);
  for (int b = 0; b < B; ++b) {
    ConstMatMap<T> V(v.value().data() + static_cast<std::size_t>(b) * Cv * N, Cv, N);
    ConstMatMap<T> Sb(S->data() + static_cast<std::size_t>(b) * N * N, N, N);
    MatMap<T>(z.data() + static_cast<std::size_t>(b) * Cv * N, Cv, N).noalias() = V * Sb.transpose();
  }
  q.graph().add_flops(2.0 * B * N * N * (d + Cv));
  const auto iq = q.id(), ik = k.id(), iv = v.id();
  return q.graph().record(std::move(z), {q, k, v}, [=](Graph<T>& gr, const Tensor<T>& go) {
    for (int b = 0; b < B; ++b) {
      ConstMatMap<T> dZ(go.data() + static_cast<std::size_t>(b) * Cv * N, Cv, N);
      ConstMatMap<T> Sb(S->data() + static_cast<std::size_t>(b) * N * N, N, N);
      ConstMatMap<T> V(gr.value(iv).data() + static_cast<std::size_t>(b) * Cv * N, Cv, N);
      if (gr.requires_grad(iv))
        MatMap<T>(gr.grad(iv).data() + static_cast<std::size_t>(b) * Cv * N, Cv, N).noalias() += dZ * Sb;
      if (!gr.requires_grad(iq) && !gr.requires_grad(ik)) continue;
      RowMat<T> dS = dZ.transpose() * V;  // N x N
      // Softmax Jacobian: dE = S o (dS - rowsum(dS o S)).
      RowMat<T> dE(N, N);
      for (int i = 0; i < N; ++i) {
        const T dot = (dS.row(i).array() * Sb.row(i).array()).sum();
        dE.row(i) = Sb.row(i).array() * (dS.row(i).array() - dot);
      }
      ConstMatMap<T> Q(gr.value(iq).data() + static_cast<std::size_t>(b) * d * N, d, N);
      ConstMatMap<T> K(gr.value(ik).data() + static_cast<std::size_t>(b) * d * N, d, N);
      if (gr.requires_grad(iq))
        MatMap<T>(gr.grad(iq).data() + static_cast<std::size_t>(b) * d * N, d, N).noalias() += K * dE.transpose();
      if (gr.requires_grad(ik))
        MatMap<T>(gr.grad(ik).data() + static_cast<std::size_t>(b) * d * N, d, N).noalias() += Q * dE;
    }
  }, "attend");
}

}  // namespace gmg::ops
