#pragma once

#include <cmath>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "gmg/tensor.hpp"

namespace gmg {

struct PixelMetrics {
  double mse = 0, mae = 0, rmse = 0, psnr = 0;
};

/// PSNR in dB for data with peak value `max_value`; +inf when mse is 0.
inline double psnr_from_mse(double mse, double max_value = 1.0) {
  if (mse <= 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(max_value * max_value / mse);
}

template <class T>
PixelMetrics pixel_metrics(const T* pred, const T* target, std::size_t n) {
  gmg::detail::require(n > 0, "pixel_metrics: empty input");
  double se = 0, ae = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = static_cast<double>(pred[i]) - static_cast<double>(target[i]);
    se += d * d;
    ae += std::abs(d);
  }
  PixelMetrics m;
  m.mse = se / static_cast<double>(n);
  m.mae = ae / static_cast<double>(n);
  m.rmse = std::sqrt(m.mse);
  m.psnr = psnr_from_mse(m.mse);
  return m;
}

template <class T>
PixelMetrics pixel_metrics(const Tensor<T>& pred, const Tensor<T>& target) {
  gmg::detail::require(pred.shape() == target.shape(),
                       "pixel_metrics: shape " + shape_str(pred.shape()) + " vs " + shape_str(target.shape()));
  return pixel_metrics(pred.data(), target.data(), pred.size());
}

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01, k2 = 0.03;
  double dynamic_range = 1.0;
};

inline std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> w(static_cast<std::size_t>(size));
  double s = 0;
  for (int i = 0; i < size; ++i) {
    const double x = i - (size - 1) / 2.0;
    w[i] = std::exp(-x * x / (2 * sigma * sigma));
    s += w[i];
  }
  for (auto& v : w) v /= s;
  return w;
}

/// SSIM of two H x W single-channel images, averaged over all valid window positions.
template <class T>
double ssim(const T* a, const T* b, int H, int W, const SsimOptions& o = {}) {
  gmg::detail::require(H >= o.window && W >= o.window,
                       "ssim: frame " + std::to_string(H) + "x" + std::to_string(W) + " smaller than window " + std::to_string(o.window));
  const std::vector<double> g = gaussian_window(o.window, o.sigma);
  const double c1 = (o.k1 * o.dynamic_range) * (o.k1 * o.dynamic_range);
  const double c2 = (o.k2 * o.dynamic_range) * (o.k2 * o.dynamic_range);
  const int k = o.window, Ho = H - k + 1, Wo = W - k + 1;
  // Separable filtering: rows first into five moment images, then columns.
  std::vector<double> r[5];
  for (auto& v : r) v.assign(static_cast<std::size_t>(H) * Wo, 0.0);
  for (int y = 0; y < H; ++y)
    for (int x = 0; x < Wo; ++x) {
      double s[5] = {0, 0, 0, 0, 0};
      for (int i = 0; i < k; ++i) {
        const double va = a[static_cast<std::size_t>(y) * W + x + i], vb = b[static_cast<std::size_t>(y) * W + x + i];
        s[0] += g[i] * va, s[1] += g[i] * vb, s[2] += g[i] * va * va, s[3] += g[i] * vb * vb, s[4] += g[i] * va * vb;
      }
      for (int m = 0; m < 5; ++m) r[m][static_cast<std::size_t>(y) * Wo + x] = s[m];
    }
  double total = 0;
  for (int y = 0; y < Ho; ++y)
    for (int x = 0; x < Wo; ++x) {
      double s[5] = {0, 0, 0, 0, 0};
      for (int i = 0; i < k; ++i)
        for (int m = 0; m < 5; ++m) s[m] += g[i] * r[m][static_cast<std::size_t>(y + i) * Wo + x];
      const double mx = s[0], my = s[1];
      const double vx = s[2] - mx * mx, vy = s[3] - my * my, cxy = s[4] - mx * my;
      total += ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    }
  return total / (static_cast<double>(Ho) * Wo);
}

struct CsiCounts {
  long long tp = 0, fp = 0, fn = 0;
  CsiCounts& operator+=(const CsiCounts& o) {
    tp += o.tp, fp += o.fp, fn += o.fn;
    return *this;
  }
  /// TP / (TP + FP + FN); 1 when neither field has an event.
  double value() const {
    const long long d = tp + fp + fn;
    return d == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(d);
  }
};

/// Counts events where value * scale >= threshold.
template <class T>
CsiCounts csi_counts(const T* pred, const T* target, std::size_t n, double threshold, double scale = 1.0) {
  CsiCounts c;
  for (std::size_t i = 0; i < n; ++i) {
    const bool p = static_cast<double>(pred[i]) * scale >= threshold;
    const bool t = static_cast<double>(target[i]) * scale >= threshold;
    c.tp += p && t;
    c.fp += p && !t;
    c.fn += !p && t;
  }
  return c;
}

template <class T>
double csi(const Tensor<T>& pred, const Tensor<T>& target, double threshold, double scale = 1.0) {
  gmg::detail::require(pred.shape() == target.shape(), "csi: shape " + shape_str(pred.shape()) + " vs " + shape_str(target.shape()));
  return csi_counts(pred.data(), target.data(), pred.size(), threshold, scale).value();
}

inline std::string threshold_key(double thr) {
  std::ostringstream os;
  os << thr;
  return "csi_" + os.str();
}

/// Per-frame curves (averaged over samples) and their mean over frames. rmse and
/// psnr are derived from the matching mse. CSI pools TP/FP/FN over samples per
/// frame, and over everything for the mean.
struct MetricReport {
  int samples = 0, frames = 0;
  double scale = 1.0;
  std::vector<double> thresholds;
  std::map<std::string, std::vector<double>> per_frame;
  std::map<std::string, double> mean;

  double operator[](const std::string& key) const { return mean.at(key); }
};

inline nlohmann::json metric_number(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  return v;
}

inline double metric_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    return std::numeric_limits<double>::quiet_NaN();
  }
  return j.get<double>();
}

inline nlohmann::json to_json(const MetricReport& r) {
  nlohmann::json j;
  j["samples"] = r.samples;
  j["frames"] = r.frames;
  j["scale"] = r.scale;
  j["thresholds"] = r.thresholds;
  for (const auto& [k, v] : r.mean) j["mean"][k] = metric_number(v);
  for (const auto& [k, v] : r.per_frame) {
    nlohmann::json arr = nlohmann::json::array();
    for (double x : v) arr.push_back(metric_number(x));
    j["per_frame"][k] = arr;
  }
  return j;
}

inline MetricReport report_from_json(const nlohmann::json& j) {
  MetricReport r;
  r.samples = j.at("samples");
  r.frames = j.at("frames");
  r.scale = j.value("scale", 1.0);
  r.thresholds = j.value("thresholds", std::vector<double>{});
  for (const auto& [k, v] : j.at("mean").items()) r.mean[k] = metric_from_json(v);
  for (const auto& [k, v] : j.at("per_frame").items())
    for (const auto& x : v) r.per_frame[k].push_back(metric_from_json(x));
  return r;
}

/// Metrics of predictions against targets, both N x T x C x H x W.
/// SSIM is skipped (reported as NaN) when frames are smaller than the window.
inline MetricReport compute_report(const Tensor<float>& pred, const Tensor<float>& target, const std::vector<double>& thresholds,
                                   double scale = 1.0, const SsimOptions& so = {}) {
  gmg::detail::require(pred.shape() == target.shape(), "compute_report: shape " + shape_str(pred.shape()) + " vs " + shape_str(target.shape()));
  gmg::detail::require(pred.rank() == 5, "compute_report expects N x T x C x H x W");
  const int N = pred.dim(0), T = pred.dim(1), C = pred.dim(2), H = pred.dim(3), W = pred.dim(4);
  if (N == 0) throw ValidationError("compute_report: empty dataset");
  const std::size_t plane = static_cast<std::size_t>(H) * W, fsz = plane * C;
  const bool do_ssim = H >= so.window && W >= so.window;
  MetricReport r;
  r.samples = N, r.frames = T, r.scale = scale, r.thresholds = thresholds;
  for (const char* k : {"mse", "mae", "rmse", "psnr", "ssim"}) r.per_frame[k].assign(T, 0.0);
  std::vector<CsiCounts> total(thresholds.size());
  for (int t = 0; t < T; ++t) {
    std::vector<CsiCounts> frame(thresholds.size());
    for (int n = 0; n < N; ++n) {
      const std::size_t off = (static_cast<std::size_t>(n) * T + t) * fsz;
      const PixelMetrics m = pixel_metrics(pred.data() + off, target.data() + off, fsz);
      r.per_frame["mse"][t] += m.mse / N;
      r.per_frame["mae"][t] += m.mae / N;
      double s = 0;
      if (do_ssim)
        for (int c = 0; c < C; ++c) s += ssim(pred.data() + off + c * plane, target.data() + off + c * plane, H, W, so);
      r.per_frame["ssim"][t] += do_ssim ? s / C / N : std::numeric_limits<double>::quiet_NaN();
      for (std::size_t k = 0; k < thresholds.size(); ++k)
        frame[k] += csi_counts(pred.data() + off, target.data() + off, fsz, thresholds[k], scale);
    }
    r.per_frame["rmse"][t] = std::sqrt(r.per_frame["mse"][t]);
    r.per_frame["psnr"][t] = psnr_from_mse(r.per_frame["mse"][t]);
    for (std::size_t k = 0; k < thresholds.size(); ++k) {
      r.per_frame[threshold_key(thresholds[k])].push_back(frame[k].value());
      total[k] += frame[k];
    }
  }
  for (const auto& [k, v] : r.per_frame) {
    double s = 0;
    for (double x : v) s += x;
    r.mean[k] = s / T;
  }
  for (std::size_t k = 0; k < thresholds.size(); ++k) r.mean[threshold_key(thresholds[k])] = total[k].value();
  r.mean["rmse"] = std::sqrt(r.mean["mse"]);
  r.mean["psnr"] = psnr_from_mse(r.mean["mse"]);
  return r;
}

}  // namespace gmg
