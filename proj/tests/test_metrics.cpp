#include <gtest/gtest.h>

#include <cmath>

#include "gmg/metrics.hpp"
#include "gmg/random.hpp"

using namespace gmg;

namespace {

Tensor<float> random_frames(Shape s, Rng& rng) { return uniform_tensor<float>(std::move(s), rng, 0, 1); }

}  // namespace

TEST(PixelMetrics, IdenticalInputsHaveInfinitePsnr) {
  Rng rng(1);
  const auto a = random_frames({2, 3, 1, 4, 4}, rng);
  const PixelMetrics m = pixel_metrics(a, a);
  EXPECT_EQ(m.mse, 0.0);
  EXPECT_EQ(m.mae, 0.0);
  EXPECT_TRUE(std::isinf(m.psnr) && m.psnr > 0);
}

TEST(PixelMetrics, ConstantOffset) {
  Tensor<double> a({1, 1, 8, 8}, 0.3), b({1, 1, 8, 8}, 0.4);
  const PixelMetrics m = pixel_metrics(a, b);
  EXPECT_NEAR(m.mae, 0.1, 1e-12);
  EXPECT_NEAR(m.mse, 0.01, 1e-12);
  EXPECT_NEAR(m.rmse, 0.1, 1e-12);
  EXPECT_NEAR(m.psnr, 20.0, 1e-6);
}

TEST(PixelMetrics, TwoPixelCaseAndSymmetry) {
  const double p[2] = {0.0, 1.0}, t[2] = {0.5, 0.5};
  const PixelMetrics m = pixel_metrics(p, t, 2);
  EXPECT_DOUBLE_EQ(m.mse, 0.25);
  EXPECT_DOUBLE_EQ(m.mae, 0.5);
  EXPECT_DOUBLE_EQ(m.rmse, 0.5);
  Rng rng(2);
  const auto a = random_frames({1, 2, 1, 5, 5}, rng), b = random_frames({1, 2, 1, 5, 5}, rng);
  const PixelMetrics ab = pixel_metrics(a, b), ba = pixel_metrics(b, a);
  EXPECT_EQ(ab.mse, ba.mse);
  EXPECT_EQ(ab.mae, ba.mae);
  EXPECT_EQ(ab.rmse, ba.rmse);
  EXPECT_THROW(pixel_metrics(a, random_frames({1, 2, 1, 5, 4}, rng)), ContractError);
}

TEST(Ssim, GaussianWindowIsNormalizedAndSymmetric) {
  const auto w = gaussian_window(11, 1.5);
  double s = 0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    s += w[i];
    EXPECT_NEAR(w[i], w[10 - i], 1e-17);
  }
  EXPECT_NEAR(s, 1.0, 1e-15);
  EXPECT_NEAR(w[5] / w[6], std::exp(0.5 / 2.25), 1e-12);
}

TEST(Ssim, IdentityIsOne) {
  Rng rng(3);
  const auto a = random_frames({1, 1, 1, 20, 17}, rng);
  EXPECT_NEAR(ssim(a.data(), a.data(), 20, 17), 1.0, 1e-9);
}

TEST(Ssim, InvertedImageScoresLower) {
  Rng rng(4);
  const auto a = random_frames({1, 1, 1, 16, 16}, rng);
  Tensor<float> b(a.shape());
  for (std::size_t i = 0; i < a.size(); ++i) b[i] = 1.0f - a[i];
  EXPECT_LT(ssim(a.data(), b.data(), 16, 16), 0.5);
}

TEST(Ssim, ConstantImagesMatchLuminanceClosedForm) {
  std::vector<double> a(14 * 14, 0.5), b(14 * 14, 0.7);
  const double c1 = 0.01 * 0.01;
  EXPECT_NEAR(ssim(a.data(), b.data(), 14, 14), (2 * 0.5 * 0.7 + c1) / (0.25 + 0.49 + c1), 1e-9);
}

TEST(Ssim, RejectsFramesSmallerThanTheWindow) {
  std::vector<double> a(100, 0.0);
  EXPECT_THROW(ssim(a.data(), a.data(), 10, 10), ContractError);
}

TEST(Csi, FourPixelCaseIsOneThird) {
  const double p[4] = {1, 1, 0, 0}, t[4] = {1, 0, 1, 0};
  const CsiCounts c = csi_counts(p, t, 4, 0.5);
  EXPECT_EQ(c.tp, 1);
  EXPECT_EQ(c.fp, 1);
  EXPECT_EQ(c.fn, 1);
  EXPECT_DOUBLE_EQ(c.value(), 1.0 / 3.0);
}

TEST(Csi, PerfectMissedAndEmptyFields) {
  const double t[3] = {1, 0, 1}, none[3] = {0, 0, 0};
  EXPECT_EQ(csi_counts(t, t, 3, 0.5).value(), 1.0);
  EXPECT_EQ(csi_counts(none, t, 3, 0.5).value(), 0.0);
  EXPECT_EQ(csi_counts(none, none, 3, 0.5).value(), 1.0);
}

TEST(Csi, MatchesBruteForceOnRandomBinaryFields) {
  Rng rng(5);
  for (int trial = 0; trial < 1000; ++trial) {
    Tensor<float> p({1, 1, 8, 8}), t({1, 1, 8, 8});
    long long tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < 64; ++i) {
      p[i] = rng.uniform() < 0.4 ? 1.0f : 0.0f;
      t[i] = rng.uniform() < 0.4 ? 1.0f : 0.0f;
      tp += p[i] == 1 && t[i] == 1, fp += p[i] == 1 && t[i] == 0, fn += p[i] == 0 && t[i] == 1;
    }
    const CsiCounts c = csi_counts(p.data(), t.data(), 64, 0.5);
    ASSERT_EQ(c.tp, tp);
    ASSERT_EQ(c.fp, fp);
    ASSERT_EQ(c.fn, fn);
    ASSERT_EQ(csi(p, t, 0.5), tp + fp + fn ? static_cast<double>(tp) / (tp + fp + fn) : 1.0);
  }
}

TEST(Csi, InvariantUnderMonotoneRescaling) {
  Rng rng(6);
  auto f = [](float v) { return std::exp(3.0f * v) - 1.0f; };
  for (int trial = 0; trial < 100; ++trial) {
    auto p = random_frames({1, 1, 1, 6, 6}, rng), t = random_frames({1, 1, 1, 6, 6}, rng);
    const double thr = rng.uniform(0.1, 0.9);
    const double base = csi(p, t, thr);
    for (auto* x : {&p, &t})
      for (auto& v : x->values()) v = f(v);
    EXPECT_EQ(csi(p, t, f(static_cast<float>(thr))), base);
  }
}

TEST(Csi, ScaleMapsThresholdsToDataUnits) {
  const float p[2] = {0.5f, 0.3f}, t[2] = {0.5f, 0.6f};
  const CsiCounts c = csi_counts(p, t, 2, 40.0, 80.0);  // 40 / 80 = 0.5
  EXPECT_EQ(c.tp, 1);
  EXPECT_EQ(c.fn, 1);
  EXPECT_EQ(threshold_key(30), "csi_30");
  EXPECT_EQ(threshold_key(2.5), "csi_2.5");
}

TEST(Report, FieldsAndAggregation) {
  Rng rng(7);
  const auto p = random_frames({3, 4, 1, 12, 12}, rng), t = random_frames({3, 4, 1, 12, 12}, rng);
  const MetricReport r = compute_report(p, t, {30, 40}, 80.0);
  EXPECT_EQ(r.samples, 3);
  EXPECT_EQ(r.frames, 4);
  for (const char* k : {"mse", "mae", "rmse", "psnr", "ssim", "csi_30", "csi_40"}) {
    ASSERT_EQ(r.per_frame.at(k).size(), 4u) << k;
    EXPECT_TRUE(std::isfinite(r[k])) << k;
  }
  EXPECT_NEAR(r["mse"], pixel_metrics(p, t).mse, 1e-12);
  EXPECT_DOUBLE_EQ(r["rmse"], std::sqrt(r["mse"]));
  EXPECT_DOUBLE_EQ(r["psnr"], psnr_from_mse(r["mse"]));
  CsiCounts all = csi_counts(p.data(), t.data(), p.size(), 30, 80.0);
  EXPECT_EQ(r["csi_30"], all.value());
}

TEST(Report, SmallFramesSkipSsimAndEmptyInputIsRejected) {
  Rng rng(8);
  const auto p = random_frames({1, 2, 1, 4, 4}, rng);
  const MetricReport r = compute_report(p, p, {});
  EXPECT_TRUE(std::isnan(r["ssim"]));
  EXPECT_TRUE(std::isinf(r["psnr"]));
  EXPECT_THROW(compute_report(Tensor<float>({0, 2, 1, 4, 4}), Tensor<float>({0, 2, 1, 4, 4}), {}), ValidationError);
}

TEST(Report, JsonRoundTripKeepsNonFiniteValues) {
  Rng rng(9);
  const auto p = random_frames({2, 3, 1, 4, 4}, rng);
  const MetricReport r = compute_report(p, p, {30}, 80.0);
  const nlohmann::json j = to_json(r);
  EXPECT_EQ(j["mean"]["psnr"], "inf");
  EXPECT_EQ(j["mean"]["ssim"], "nan");
  const MetricReport back = report_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(back.samples, 2);
  EXPECT_EQ(back.thresholds, r.thresholds);
  EXPECT_TRUE(std::isinf(back["psnr"]));
  EXPECT_TRUE(std::isnan(back["ssim"]));
  EXPECT_EQ(back["mse"], 0.0);
  EXPECT_EQ(back.per_frame.at("csi_30"), r.per_frame.at("csi_30"));
}
