#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "gmg/random.hpp"
#include "gmg/tensor.hpp"

namespace gmg {

/// A batch of sequences N x T x C x H x W in [0, 1] plus free-form metadata
/// (source, seed, interval, scale, generator parameters).
struct SequenceRecord {
  Tensor<float> data;
  nlohmann::json meta = nlohmann::json::object();

  int count() const { return data.dim(0); }
  int frames() const { return data.dim(1); }
  /// Multiplier taking stored values to data units (CSI thresholds are given in data units).
  double scale() const { return meta.value("scale", 1.0); }
};

/// Throws ValidationError unless every value lies in [0, 1].
inline void validate_unit_range(const Tensor<float>& t, const std::string& what) {
  for (std::size_t i = 0; i < t.size(); ++i) {
    const float v = t[i];
    if (!(v >= 0.0f && v <= 1.0f))
      throw ValidationError(what + ": value " + std::to_string(v) + " at flat index " + std::to_string(i) + " outside [0, 1]");
  }
}

// ---------------------------------------------------------------- glyphs

using Glyph = Tensor<float>;  // 28 x 28
constexpr int kGlyphSize = 28;

namespace glyph_detail {

struct Stroke {
  std::vector<std::array<float, 2>> pts;  // unit box, (x, y), y down
};

inline std::vector<std::array<float, 2>> arc(float cx, float cy, float rx, float ry, float a0, float a1, int n = 14) {
  std::vector<std::array<float, 2>> p;
  for (int i = 0; i <= n; ++i) {
    const float a = a0 + (a1 - a0) * static_cast<float>(i) / n;
    p.push_back({cx + rx * std::cos(a), cy + ry * std::sin(a)});
  }
  return p;
}

inline std::vector<Stroke> digit_strokes(int d) {
  constexpr float pi = 3.14159265f;
  switch (d) {
    case 0: return {{arc(0.5f, 0.5f, 0.28f, 0.4f, 0, 2 * pi, 24)}};
    case 1: return {{{{0.38f, 0.25f}, {0.55f, 0.1f}, {0.55f, 0.9f}}}};
    case 2: {
      auto top = arc(0.5f, 0.32f, 0.26f, 0.22f, pi, 2.2f * pi);
      top.push_back({0.22f, 0.9f});
      top.push_back({0.8f, 0.9f});
      return {{top}};
    }
    case 3: return {{arc(0.48f, 0.3f, 0.25f, 0.2f, -0.8f * pi, 0.5f * pi)}, {arc(0.48f, 0.7f, 0.28f, 0.2f, -0.5f * pi, 0.8f * pi)}};
    case 4: return {{{{0.65f, 0.9f}, {0.65f, 0.1f}, {0.2f, 0.65f}, {0.82f, 0.65f}}}};
    case 5: {
      Stroke s{{{0.78f, 0.1f}, {0.3f, 0.1f}, {0.27f, 0.45f}}};
      auto bowl = arc(0.5f, 0.66f, 0.27f, 0.23f, -0.7f * pi, 0.8f * pi);
      s.pts.insert(s.pts.end(), bowl.begin(), bowl.end());
      return {s};
    }
    case 6: {
      Stroke s{{{0.7f, 0.1f}, {0.38f, 0.4f}}};
      return {s, {arc(0.5f, 0.67f, 0.25f, 0.23f, 0, 2 * pi, 20)}};
    }
    case 7: return {{{{0.2f, 0.1f}, {0.8f, 0.1f}, {0.42f, 0.9f}}}};
    case 8: return {{arc(0.5f, 0.3f, 0.2f, 0.2f, 0, 2 * pi, 20)}, {arc(0.5f, 0.7f, 0.26f, 0.2f, 0, 2 * pi, 20)}};
    default: {
      Stroke s{arc(0.5f, 0.33f, 0.24f, 0.23f, 0, 2 * pi, 20)};
      return {s, {{{0.74f, 0.33f}, {0.62f, 0.9f}}}};
    }
  }
}

inline float segment_distance(float px, float py, std::array<float, 2> a, std::array<float, 2> b) {
  const float dx = b[0] - a[0], dy = b[1] - a[1];
  const float len2 = dx * dx + dy * dy;
  float t = len2 > 0 ? ((px - a[0]) * dx + (py - a[1]) * dy) / len2 : 0.0f;
  t = std::clamp(t, 0.0f, 1.0f);
  const float ex = a[0] + t * dx - px, ey = a[1] + t * dy - py;
  return std::sqrt(ex * ex + ey * ey);
}

/// Rasterizes strokes into the central 20 x 20 of a 28 x 28 canvas (MNIST framing),
/// with a horizontal shear `slant` and pen radius `radius` in pixels.
inline Glyph rasterize(const std::vector<Stroke>& strokes, float radius, float slant) {
  Glyph g({kGlyphSize, kGlyphSize});
  for (int y = 0; y < kGlyphSize; ++y)
    for (int x = 0; x < kGlyphSize; ++x) {
      float best = 1e9f;
      for (const auto& s : strokes)
        for (std::size_t i = 0; i + 1 < s.pts.size(); ++i) {
          auto map = [&](std::array<float, 2> p) {
            return std::array<float, 2>{4.0f + 20.0f * (p[0] + slant * (0.5f - p[1])), 4.0f + 20.0f * p[1]};
          };
          best = std::min(best, segment_distance(x + 0.5f, y + 0.5f, map(s.pts[i]), map(s.pts[i + 1])));
        }
      g[static_cast<std::size_t>(y) * kGlyphSize + x] = std::clamp(radius + 0.5f - best, 0.0f, 1.0f);
    }
  return g;
}

}  // namespace glyph_detail

/// Sixteen digit-like glyphs: the ten digits in a regular pen, then six of them
/// again slanted with a heavier pen.
inline std::vector<Glyph> bundled_glyphs() {
  std::vector<Glyph> out;
  for (int d = 0; d < 10; ++d) out.push_back(glyph_detail::rasterize(glyph_detail::digit_strokes(d), 1.2f, 0.0f));
  for (int d : {0, 2, 3, 5, 7, 8}) out.push_back(glyph_detail::rasterize(glyph_detail::digit_strokes(d), 1.7f, 0.25f));
  return out;
}

/// Reads glyphs from an MNIST idx3-ubyte image file.
inline std::vector<Glyph> load_idx_glyphs(const std::string& path, int limit = -1) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open glyph file " + path);
  auto be32 = [&]() {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw TruncationError("truncated idx header in " + path);
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) | b[3];
  };
  if (be32() != 2051u) throw HeaderError(path + " is not an idx3-ubyte image file");
  const std::uint32_t n = be32(), rows = be32(), cols = be32();
  if (rows != kGlyphSize || cols != kGlyphSize) throw HeaderError(path + ": expected 28x28 images");
  const std::uint32_t take = limit > 0 ? std::min<std::uint32_t>(n, static_cast<std::uint32_t>(limit)) : n;
  std::vector<Glyph> out;
  std::vector<unsigned char> buf(kGlyphSize * kGlyphSize);
  for (std::uint32_t i = 0; i < take; ++i) {
    if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
      throw TruncationError(path + ": payload ends at image " + std::to_string(i) + " of " + std::to_string(n));
    Glyph g({kGlyphSize, kGlyphSize});
    for (std::size_t k = 0; k < buf.size(); ++k) g[k] = buf[k] / 255.0f;
    out.push_back(std::move(g));
  }
  return out;
}

// ---------------------------------------------------------- moving MNIST

struct MovingMnistSpec {
  int size = 64;
  int frames = 20;
  int digits = 2;
  int max_speed = 3;
};

/// Position of a glyph origin along one axis after `t` steps, reflecting off [0, limit].
inline int bounce_position(int x0, int v, int t, int limit) {
  int x = x0;
  for (int s = 0; s < t; ++s) {
    x += v;
    if (x < 0) x = -x, v = -v;
    if (x > limit) x = 2 * limit - x, v = -v;
  }
  return x;
}

/// Max-composites `glyph` onto a single-channel H x W frame at origin (x, y).
inline void paste_max(float* frame, int H, int W, const Glyph& glyph, int x, int y) {
  const int gh = glyph.dim(0), gw = glyph.dim(1);
  for (int r = 0; r < gh; ++r)
    for (int c = 0; c < gw; ++c) {
      const int yy = y + r, xx = x + c;
      if (yy < 0 || yy >= H || xx < 0 || xx >= W) continue;
      float& dst = frame[static_cast<std::size_t>(yy) * W + xx];
      dst = std::max(dst, glyph[static_cast<std::size_t>(r) * gw + c]);
    }
}

inline SequenceRecord gen_moving_mnist(std::uint64_t seed, int n_sequences, const std::vector<Glyph>& glyphs,
                                       const MovingMnistSpec& spec = {}) {
  gmg::detail::require(n_sequences >= 1, "gen_moving_mnist: n_sequences must be >= 1");
  gmg::detail::require(!glyphs.empty(), "gen_moving_mnist: no glyphs");
  const int S = spec.size, T = spec.frames, limit = S - kGlyphSize;
  gmg::detail::require(limit >= 0 && spec.max_speed >= 1, "gen_moving_mnist: frame smaller than a glyph");
  Rng rng(seed);
  SequenceRecord rec;
  rec.data = Tensor<float>({n_sequences, T, 1, S, S});
  rec.meta = {{"source", "moving_mnist"}, {"seed", seed}, {"interval", "1 frame"}, {"scale", 1.0}};
  nlohmann::json tracks = nlohmann::json::array();
  auto velocity = [&] {
    int v = rng.uniform_int(1, spec.max_speed);
    return rng.uniform() < 0.5 ? -v : v;
  };
  for (int n = 0; n < n_sequences; ++n) {
    nlohmann::json seq = nlohmann::json::array();
    for (int d = 0; d < spec.digits; ++d) {
      const int gi = rng.uniform_int(0, static_cast<int>(glyphs.size()) - 1);
      const int x0 = rng.uniform_int(0, limit), y0 = rng.uniform_int(0, limit);
      const int vx = velocity(), vy = velocity();
      seq.push_back({{"glyph", gi}, {"x0", x0}, {"y0", y0}, {"vx", vx}, {"vy", vy}});
      for (int t = 0; t < T; ++t) {
        float* frame = rec.data.data() + (static_cast<std::size_t>(n) * T + t) * S * S;
        paste_max(frame, S, S, glyphs[gi], bounce_position(x0, vx, t, limit), bounce_position(y0, vy, t, limit));
      }
    }
    tracks.push_back(seq);
  }
  rec.meta["tracks"] = tracks;
  return rec;
}

// ------------------------------------------------------------------ blobs

/// One anisotropic Gaussian: centre moves linearly, both axes scale by exp(growth t),
/// amplitude decays as exp(-decay t).
struct BlobParams {
  double cx = 0, cy = 0, vx = 0, vy = 0;
  double sx = 1, sy = 1, theta = 0;
  double growth = 0, amplitude = 1, decay = 0;
};

struct BlobSpec {
  int size = 64;
  int frames = 20;
  int min_blobs = 1, max_blobs = 3;
  double max_speed = 1.5;    // pixels per frame
  double min_sigma = 2.0, max_sigma = 6.0;
  double max_growth = 0.05;  // |log-scale change| per frame
  double max_decay = 0.06;
  double scale = 80.0;       // stored value 1.0 corresponds to this many data units
};

inline double blob_value(const BlobParams& b, double x, double y, int t) {
  const double cx = b.cx + b.vx * t, cy = b.cy + b.vy * t;
  const double g = std::exp(b.growth * t);
  const double sx = b.sx * g, sy = b.sy * g;
  const double c = std::cos(b.theta), s = std::sin(b.theta);
  const double dx = x - cx, dy = y - cy;
  const double u = (c * dx + s * dy) / sx, v = (-s * dx + c * dy) / sy;
  return b.amplitude * std::exp(-b.decay * t) * std::exp(-0.5 * (u * u + v * v));
}

/// Renders T single-channel frames (T x 1 x H x W); overlapping blobs combine by max.
inline Tensor<float> render_blobs(const std::vector<BlobParams>& blobs, int height, int width, int frames) {
  Tensor<float> out({frames, 1, height, width});
  for (int t = 0; t < frames; ++t)
    for (int y = 0; y < height; ++y)
      for (int x = 0; x < width; ++x) {
        double v = 0.0;
        for (const auto& b : blobs) v = std::max(v, blob_value(b, x, y, t));
        out[(static_cast<std::size_t>(t) * height + y) * width + x] = static_cast<float>(std::clamp(v, 0.0, 1.0));
      }
  return out;
}

inline nlohmann::json to_json(const BlobParams& b) {
  return {{"cx", b.cx}, {"cy", b.cy}, {"vx", b.vx}, {"vy", b.vy}, {"sx", b.sx}, {"sy", b.sy},
          {"theta", b.theta}, {"growth", b.growth}, {"amplitude", b.amplitude}, {"decay", b.decay}};
}

inline BlobParams blob_from_json(const nlohmann::json& j) {
  BlobParams b;
  b.cx = j.at("cx"), b.cy = j.at("cy"), b.vx = j.at("vx"), b.vy = j.at("vy");
  b.sx = j.at("sx"), b.sy = j.at("sy"), b.theta = j.at("theta");
  b.growth = j.at("growth"), b.amplitude = j.at("amplitude"), b.decay = j.at("decay");
  return b;
}

inline SequenceRecord gen_blob_sequences(std::uint64_t seed, int n_sequences, const BlobSpec& spec = {}) {
  gmg::detail::require(n_sequences >= 1, "gen_blob_sequences: n_sequences must be >= 1");
  gmg::detail::require(spec.min_blobs >= 1 && spec.max_blobs >= spec.min_blobs, "gen_blob_sequences: bad blob count range");
  Rng rng(seed);
  const int S = spec.size, T = spec.frames;
  SequenceRecord rec;
  rec.data = Tensor<float>({n_sequences, T, 1, S, S});
  rec.meta = {{"source", "blobs"}, {"seed", seed}, {"interval", "1 frame"}, {"scale", spec.scale}};
  nlohmann::json all = nlohmann::json::array();
  const std::size_t per = static_cast<std::size_t>(T) * S * S;
  for (int n = 0; n < n_sequences; ++n) {
    std::vector<BlobParams> blobs(static_cast<std::size_t>(rng.uniform_int(spec.min_blobs, spec.max_blobs)));
    nlohmann::json js = nlohmann::json::array();
    for (auto& b : blobs) {
      b.cx = rng.uniform(0.2 * S, 0.8 * S);
      b.cy = rng.uniform(0.2 * S, 0.8 * S);
      b.vx = rng.uniform(-spec.max_speed, spec.max_speed);
      b.vy = rng.uniform(-spec.max_speed, spec.max_speed);
      b.sx = rng.uniform(spec.min_sigma, spec.max_sigma);
      b.sy = rng.uniform(spec.min_sigma, spec.max_sigma);
      b.theta = rng.uniform(0.0, 3.141592653589793);
      b.growth = rng.uniform(-spec.max_growth, spec.max_growth);
      b.amplitude = rng.uniform(0.6, 1.0);
      b.decay = rng.uniform(0.0, spec.max_decay);
      js.push_back(to_json(b));
    }
    const Tensor<float> frames = render_blobs(blobs, S, S, T);
    std::copy_n(frames.data(), per, rec.data.data() + n * per);
    all.push_back(js);
  }
  rec.meta["blobs"] = all;
  return rec;
}

}  // namespace gmg
