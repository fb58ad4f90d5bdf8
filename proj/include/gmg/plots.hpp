#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "gmg/metrics.hpp"
#include "gmg/sequence_io.hpp"

namespace gmg {

struct Series {
  std::string label;
  std::vector<double> y;
};

/// Minimal SVG line chart; non-finite points are skipped.
inline std::string svg_line_chart(const std::string& title, const std::string& xlabel, const std::vector<Series>& series,
                                  bool log_y = false) {
  const double W = 640, H = 400, L = 70, R = 20, Tm = 40, B = 50;
  double lo = INFINITY, hi = -INFINITY;
  std::size_t n = 0;
  auto tr = [&](double v) { return log_y ? std::log10(std::max(v, 1e-12)) : v; };
  for (const auto& s : series) {
    n = std::max(n, s.y.size());
    for (double v : s.y)
      if (std::isfinite(v)) lo = std::min(lo, tr(v)), hi = std::max(hi, tr(v));
  }
  if (!(lo <= hi)) lo = 0, hi = 1;
  if (hi - lo < 1e-12) hi = lo + 1;
  const double xs = n > 1 ? (W - L - R) / (n - 1) : 0;
  auto px = [&](std::size_t i) { return L + xs * i; };
  auto py = [&](double v) { return Tm + (H - Tm - B) * (1 - (tr(v) - lo) / (hi - lo)); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};

  std::ostringstream os;
  os.precision(6);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n"
     << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
     << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << title << "</text>\n"
     << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n"
     << "<line x1=\"" << L << "\" y1=\"" << Tm << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n"
     << "<text x=\"" << W / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << xlabel << "</text>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = lo + (hi - lo) * k / 4.0;
    const double y = Tm + (H - Tm - B) * (1 - k / 4.0);
    os << "<text x=\"" << L - 6 << "\" y=\"" << y + 4 << "\" text-anchor=\"end\">" << (log_y ? std::pow(10.0, v) : v) << "</text>\n";
  }
  if (n > 0) os << "<text x=\"" << W - R << "\" y=\"" << H - B + 16 << "\" text-anchor=\"end\">" << n - 1 << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    os << "<polyline fill=\"none\" stroke-width=\"1.5\" stroke=\"" << colors[s % 8] << "\" points=\"";
    for (std::size_t i = 0; i < series[s].y.size(); ++i)
      if (std::isfinite(series[s].y[i])) os << px(i) << "," << py(series[s].y[i]) << " ";
    os << "\"/>\n<text x=\"" << W - R - 4 << "\" y=\"" << Tm + 14 * (s + 1) << "\" text-anchor=\"end\" fill=\"" << colors[s % 8]
       << "\">" << series[s].label << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

/// Binary PGM (P5) of an H x W image in [0, 1].
inline void write_pgm(const std::string& path, const std::vector<float>& img, int H, int W) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot write " + path);
  os << "P5\n" << W << " " << H << "\n255\n";
  for (float v : img) os.put(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f))));
}

/// Grid of |pred - target| tiles: one row per sample (up to `max_rows`), one column per
/// frame, first channel only, with a 1-pixel white gutter.
inline std::vector<float> error_map_grid(const Tensor<float>& pred, const Tensor<float>& target, int& H_out, int& W_out,
                                         int max_rows = 4) {
  gmg::detail::require(pred.shape() == target.shape() && pred.rank() == 5, "error_map_grid: need matching N x T x C x H x W");
  const int N = std::min(pred.dim(0), max_rows), T = pred.dim(1), C = pred.dim(2), H = pred.dim(3), W = pred.dim(4);
  H_out = N * (H + 1) - 1, W_out = T * (W + 1) - 1;
  std::vector<float> img(static_cast<std::size_t>(H_out) * W_out, 1.0f);
  for (int n = 0; n < N; ++n)
    for (int t = 0; t < T; ++t)
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          const std::size_t i = ((static_cast<std::size_t>(n) * T + t) * C * H + y) * W + x;
          img[static_cast<std::size_t>(n * (H + 1) + y) * W_out + t * (W + 1) + x] = std::abs(pred[i] - target[i]);
        }
  return img;
}

inline std::vector<double> read_loss_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::string line;
  std::getline(in, line);
  std::vector<double> mse;
  while (std::getline(in, line)) {
    const auto a = line.find(','), b = line.rfind(',');
    if (a == std::string::npos || b == a) throw IoError(path + ": malformed line '" + line + "'");
    mse.push_back(std::stod(line.substr(b + 1)));
  }
  return mse;
}

/// For each report.json, writes into `out_dir` (named after the report's directory):
///   <run>_loss.svg       when loss.csv sits next to the report
///   <run>_per_frame.svg  per-frame mse/mae and ssim curves
///   <run>_error_map.pgm  when predictions.gmgs and targets.gmgs sit next to it
/// Returns the written paths.
inline std::vector<std::string> emit_plots(const std::vector<std::string>& report_paths, const std::string& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::vector<std::string> written;
  auto put = [&](const fs::path& p, const std::string& text) {
    std::ofstream os(p, std::ios::trunc);
    if (!os) throw IoError("cannot write " + p.string());
    os << text;
    written.push_back(p.string());
  };
  for (const auto& rp : report_paths) {
    const fs::path report(rp);
    if (!fs::exists(report)) throw IoError("report not found: " + rp);
    const fs::path dir = report.parent_path().empty() ? fs::path(".") : report.parent_path();
    std::string run = fs::absolute(dir).lexically_normal().filename().string();
    if (run.empty() || run == ".") run = report.stem().string();

    std::ifstream in(report);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw IoError(rp + ": " + e.what());
    }
    const MetricReport r = report_from_json(j.contains("metrics") ? j.at("metrics") : j);

    if (fs::exists(dir / "loss.csv"))
      put(fs::path(out_dir) / (run + "_loss.svg"), svg_line_chart(run + ": training loss (per-pixel MSE)", "step",
                                                                     {{"mse", read_loss_csv((dir / "loss.csv").string())}}, true));
    std::vector<Series> curves;
    for (const char* k : {"mse", "mae", "ssim"})
      if (r.per_frame.count(k)) curves.push_back({k, r.per_frame.at(k)});
    for (const auto& [k, v] : r.per_frame)
      if (k.rfind("csi_", 0) == 0) curves.push_back({k, v});
    put(fs::path(out_dir) / (run + "_per_frame.svg"), svg_line_chart(run + ": per-frame metrics", "forecast frame", curves));

    if (fs::exists(dir / "predictions.gmgs") && fs::exists(dir / "targets.gmgs")) {
      const SequenceRecord p = load_sequences((dir / "predictions.gmgs").string());
      const SequenceRecord t = load_sequences((dir / "targets.gmgs").string());
      int H = 0, W = 0;
      const std::vector<float> img = error_map_grid(p.data, t.data, H, W);
      const fs::path out = fs::path(out_dir) / (run + "_error_map.pgm");
      write_pgm(out.string(), img, H, W);
      written.push_back(out.string());
    }
  }
  return written;
}

}  // namespace gmg
