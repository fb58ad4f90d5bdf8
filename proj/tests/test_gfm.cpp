#include <gtest/gtest.h>

#include <algorithm>

#include "gmg/gfm.hpp"
#include "test_util.hpp"

using namespace gmg;
using namespace gmg::testing;

namespace {

Tensor<double> square22() {
  Tensor<double> t({1, 1, 2, 2});
  t[0] = 1, t[1] = 2, t[2] = 3, t[3] = 4;
  return t;
}

struct Gfm {
  ParameterSet<double> ps;
  GfmParams<double> p;
  Gfm(int cin, int hidden) : p(GfmParams<double>::create(ps, "gfm.", cin, hidden)) {}
};

}  // namespace

TEST(AdaptivePool, SquareToOne) {
  Graph<double> g;
  EXPECT_DOUBLE_EQ(ops::adaptive_avg_pool(g.constant(square22()), 1, 1).value()[0], 2.5);
}

TEST(AdaptivePool, SameSizeIsIdentityAndConstantStaysConstant) {
  Rng rng(1);
  Graph<double> g;
  const Tensor<double> x = uniform_tensor<double>({2, 3, 5, 7}, rng, -1, 1);
  EXPECT_TRUE(ops::adaptive_avg_pool(g.constant(x), 5, 7).value() == x);
  const auto y = ops::adaptive_avg_pool(g.constant(Tensor<double>({1, 2, 9, 6}, 0.7)), 4, 3).value();
  for (double v : y.values()) EXPECT_NEAR(v, 0.7, 1e-15);
}

TEST(AdaptivePool, FourByFourToTwoByTwo) {
  Tensor<double> x({1, 1, 4, 4});
  for (int i = 0; i < 16; ++i) x[i] = i;
  Graph<double> g;
  const auto y = ops::adaptive_avg_pool(g.constant(x), 2, 2).value();
  EXPECT_DOUBLE_EQ(y[0], (0 + 1 + 4 + 5) / 4.0);
  EXPECT_DOUBLE_EQ(y[3], (10 + 11 + 14 + 15) / 4.0);
}

TEST(AdaptivePool, RejectsUpsampling) {
  Graph<double> g;
  EXPECT_THROW(ops::adaptive_avg_pool(g.constant(square22()), 3, 1), ContractError);
}

TEST(GlobalFeature, IdentityWeightsGiveTheMean) {
  Gfm m(1, 1);
  m.p.w_pre->value[0] = 1, m.p.w_lin->value[0] = 1;
  Graph<double> g;
  for (double v : global_feature(g, m.p, g.constant(square22())).value().values()) EXPECT_DOUBLE_EQ(v, 2.5);
}

TEST(GlobalFeature, SpatiallyConstantAndNonNegative) {
  Rng rng(2);
  Gfm m(3, 5);
  randomize(m.ps, rng, 1.0);
  Graph<double> g;
  const auto xg = global_feature(g, m.p, g.constant(uniform_tensor<double>({2, 3, 6, 4}, rng, -1, 1))).value();
  ASSERT_EQ(xg.shape(), (Shape{2, 5, 6, 4}));
  for (int b = 0; b < 2; ++b)
    for (int c = 0; c < 5; ++c)
      for (int y = 0; y < 6; ++y)
        for (int x = 0; x < 4; ++x) {
          EXPECT_EQ(xg.at(b, c, y, x), xg.at(b, c, 0, 0));
          EXPECT_GE(xg.at(b, c, y, x), 0.0);
        }
}

TEST(GatedFuse, SaturatedGatesSelectAnEndpoint) {
  Rng rng(3);
  Gfm m(1, 2);
  Graph<double> g;
  const Var<double> h = g.constant(uniform_tensor<double>({1, 2, 3, 3}, rng, -1, 1));
  const Var<double> xg = g.constant(uniform_tensor<double>({1, 2, 3, 3}, rng, -1, 1));
  m.p.b_gate->value.fill(60.0);
  const auto keep = gated_fuse(g, m.p, h, xg).value();
  m.p.b_gate->value.fill(-60.0);
  const auto swap = gated_fuse(g, m.p, h, xg).value();
  m.p.b_gate->value.fill(0.0);
  const auto mid = gated_fuse(g, m.p, h, xg).value();
  for (std::size_t i = 0; i < keep.size(); ++i) {
    EXPECT_NEAR(keep[i], h.value()[i], 1e-12);
    EXPECT_NEAR(swap[i], xg.value()[i], 1e-12);
    EXPECT_NEAR(mid[i], 0.5 * (h.value()[i] + xg.value()[i]), 1e-15);
  }
}

TEST(GatedFuse, OutputIsConvexCombination) {
  Rng rng(4);
  for (int trial = 0; trial < 1000; ++trial) {
    Gfm m(1, 2);
    randomize(m.ps, rng, 3.0);
    Graph<double> g;
    const Var<double> h = g.constant(uniform_tensor<double>({1, 2, 2, 2}, rng, -5, 5));
    const Var<double> xg = g.constant(uniform_tensor<double>({1, 2, 2, 2}, rng, -5, 5));
    const auto out = gated_fuse(g, m.p, h, xg).value();
    for (std::size_t i = 0; i < out.size(); ++i) {
      const double a = h.value()[i], b = xg.value()[i];
      ASSERT_GE(out[i], std::min(a, b) - 1e-12);
      ASSERT_LE(out[i], std::max(a, b) + 1e-12);
    }
  }
}

TEST(FeatureFocus, SaturatedWeightsPassOrBlock) {
  Rng rng(5);
  Gfm m(2, 3);
  Graph<double> g;
  const Var<double> hg = g.constant(uniform_tensor<double>({1, 3, 4, 4}, rng, -1, 1));
  const Var<double> x = g.constant(uniform_tensor<double>({1, 2, 4, 4}, rng, -1, 1));
  m.p.b_ms[0]->value.fill(60.0);
  const auto pass = feature_focus(g, m.p, hg, x).value();
  m.p.b_ms[0]->value.fill(-60.0);
  const auto block = feature_focus(g, m.p, hg, x).value();
  for (std::size_t i = 0; i < pass.size(); ++i) {
    EXPECT_NEAR(pass[i], hg.value()[i], 1e-12);
    EXPECT_NEAR(block[i], 0.0, 1e-12);
  }
}

TEST(FeatureFocus, MatchesNaiveMultiScaleOracle) {
  Rng rng(6);
  Gfm m(2, 3);
  randomize(m.ps, rng, 0.7);
  const Tensor<double> hg = uniform_tensor<double>({2, 3, 5, 5}, rng, -1, 1);
  const Tensor<double> x = uniform_tensor<double>({2, 2, 5, 5}, rng, -1, 1);
  Tensor<double> acc({2, 3, 5, 5});
  for (int s = 0; s < 3; ++s) {
    const auto br = naive_conv_same(x, m.p.w_ms[s]->value, &m.p.b_ms[s]->value);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += br[i];
  }
  Graph<double> g;
  const auto out = feature_focus(g, m.p, g.constant(hg), g.constant(x)).value();
  for (int b = 0; b < 2; ++b)
    for (int c = 0; c < 3; ++c) {
      double mean = 0;
      for (int y = 0; y < 5; ++y)
        for (int xx = 0; xx < 5; ++xx) mean += acc.at(b, c, y, xx) / 25.0;
      const double w = sigm(mean);
      for (int y = 0; y < 5; ++y)
        for (int xx = 0; xx < 5; ++xx) EXPECT_NEAR(out.at(b, c, y, xx), w * hg.at(b, c, y, xx), 1e-12);
    }
}

TEST(Gfm, ForwardKeepsHiddenShape) {
  Rng rng(7);
  Gfm m(4, 6);
  m.p.init(rng);
  Graph<double> g;
  const auto out = gfm_forward(g, m.p, g.constant(uniform_tensor<double>({2, 4, 8, 8}, rng, 0, 1)),
                               g.constant(uniform_tensor<double>({2, 6, 8, 8}, rng, -1, 1)));
  EXPECT_EQ(out.shape(), (Shape{2, 6, 8, 8}));
  EXPECT_TRUE(out.value().all_finite());
  EXPECT_GT(g.flops().at("gfm"), 0.0);
}

TEST(GfmSimple, MatchesNaiveOracle) {
  Rng rng(8);
  ParameterSet<double> ps;
  auto p = GfmSimpleParams<double>::create(ps, "s.", 2, 3);
  randomize(ps, rng, 0.8);
  const Tensor<double> x = uniform_tensor<double>({1, 2, 6, 5}, rng, -1, 1);
  const Tensor<double> h = uniform_tensor<double>({1, 3, 6, 5}, rng, -1, 1);
  const auto conv = naive_conv_same(x, p.w->value, &p.b->value);
  Graph<double> g;
  const auto out = gfm_simple(g, p, g.constant(x), g.constant(h)).value();
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_NEAR(out[i], h[i] * conv[i], 1e-12);
}

TEST(GfmSimple, RejectsMismatchedHidden) {
  ParameterSet<double> ps;
  auto p = GfmSimpleParams<double>::create(ps, "s.", 2, 3);
  Graph<double> g;
  EXPECT_THROW(gfm_simple(g, p, g.constant(Tensor<double>({1, 2, 4, 4})), g.constant(Tensor<double>({1, 4, 4, 4}))),
               ContractError);
}
