#include <gtest/gtest.h>

#include <cstdint>

#include "gmg/conv.hpp"
#include "gmg/ops.hpp"
#include "test_util.hpp"

using namespace gmg;
using namespace gmg::testing;

TEST(Tensor, LayoutAndSlicing) {
  Tensor<double> x({2, 3, 4, 5});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i);
  EXPECT_EQ(x.at(1, 2, 3, 4), 119.0);
  EXPECT_EQ(x.offset(1, 0, 2, 1), 60u + 11);
  const auto b = batch_slice(x, 1, 2);
  EXPECT_EQ(b.shape(), (Shape{1, 3, 4, 5}));
  EXPECT_EQ(b[0], 60.0);
  EXPECT_TRUE(batch_concat(std::vector<Tensor<double>>{batch_slice(x, 0, 1), b}) == x);
  EXPECT_THROW(batch_slice(x, 1, 3), ContractError);
  EXPECT_EQ(x.reshaped({6, 20}).dim(-1), 20);
}

TEST(Tensor, StorageIsCacheLineAligned) {
  for (int n : {1, 3, 17, 1000}) {
    Tensor<float> t({n});
    EXPECT_EQ(reinterpret_cast<std::uintptr_t>(t.data()) % 64, 0u);
    Tensor<double> c = t.cast<double>();
    EXPECT_EQ(reinterpret_cast<std::uintptr_t>(c.data()) % 64, 0u);
  }
}

TEST(Tensor, SequenceFramesAndTimeSlices) {
  Tensor<float> s({2, 4, 1, 2, 2});
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = static_cast<float>(i);
  const auto f = frame_at(s, 2);
  EXPECT_EQ(f.shape(), (Shape{2, 1, 2, 2}));
  EXPECT_EQ(f[0], 8.0f);
  EXPECT_EQ(f[4], 24.0f);
  const auto ts = time_slice(s, 1, 3);
  EXPECT_EQ(ts.shape(), (Shape{2, 2, 1, 2, 2}));
  EXPECT_EQ(ts[4], 8.0f);
}

TEST(Autograd, ProductRuleAndFanOut) {
  Graph<double> g;
  ParameterSet<double> ps;
  Parameter<double>& a = ps.add("a", {1, 1, 1, 2});
  a.value[0] = 3, a.value[1] = -2;
  const Var<double> va = g.param(a);
  // loss = sum(a * a + a)
  const Var<double> loss = ops::sum(ops::add(ops::mul(va, va), va));
  g.backward(loss);
  EXPECT_EQ(loss.value()[0], 9 + 3 + 4 - 2);
  EXPECT_EQ(a.grad[0], 7.0);
  EXPECT_EQ(a.grad[1], -3.0);
}

TEST(Autograd, ConstantsCarryNoGradient) {
  Graph<double> g;
  const Var<double> c = g.constant(Tensor<double>({1, 1, 1, 1}, 2.0));
  EXPECT_FALSE(c.requires_grad());
  EXPECT_FALSE(ops::tanh(c).requires_grad());
  EXPECT_NO_THROW(g.backward(ops::sum(c)));
}

TEST(Autograd, GradientsAccumulateAcrossGraphs) {
  ParameterSet<double> ps;
  Parameter<double>& a = ps.add("a", {1, 1, 1, 1});
  a.value[0] = 0.5;
  for (int i = 0; i < 2; ++i) {
    Graph<double> g;
    g.backward(ops::sum(ops::scale(g.param(a), 3.0)));
  }
  EXPECT_EQ(a.grad[0], 6.0);
  ps.zero_grad();
  EXPECT_EQ(a.grad[0], 0.0);
}

TEST(Ops, BlendAndNonlinearities) {
  Graph<double> g;
  auto c = [&](double v) { return g.constant(Tensor<double>({1, 1, 1, 1}, v)); };
  EXPECT_DOUBLE_EQ(ops::blend(c(2), c(-1), c(0.25)).value()[0], 0.25 * 2 - 0.75);
  EXPECT_DOUBLE_EQ(ops::sigmoid(c(0)).value()[0], 0.5);
  EXPECT_DOUBLE_EQ(ops::relu(c(-3)).value()[0], 0.0);
  EXPECT_NEAR(ops::sigmoid(c(-800)).value()[0], 0.0, 1e-300);
  EXPECT_DOUBLE_EQ(ops::sigmoid(c(800)).value()[0], 1.0);
}

TEST(Ops, ConcatSliceRoundTrip) {
  Rng rng(1);
  Graph<double> g;
  const Var<double> a = g.constant(uniform_tensor<double>({2, 3, 2, 2}, rng, -1, 1));
  const Var<double> b = g.constant(uniform_tensor<double>({2, 1, 2, 2}, rng, -1, 1));
  const Var<double> ab = ops::concat_channels(std::vector<Var<double>>{a, b});
  EXPECT_EQ(ab.shape(), (Shape{2, 4, 2, 2}));
  EXPECT_TRUE(ops::slice_channels(ab, 0, 3).value() == a.value());
  EXPECT_TRUE(ops::slice_channels(ab, 3, 1).value() == b.value());
}

TEST(Ops, LinearMatchesMatrixProduct) {
  Graph<double> g;
  Tensor<double> x({1, 2}, std::vector<double>{1, 2}), w({3, 2}, std::vector<double>{1, 0, 0, 1, 1, 1});
  Tensor<double> b({3}, std::vector<double>{0.5, 0, -1});
  const auto y = ops::linear(g.constant(x), g.constant(w), g.constant(b)).value();
  EXPECT_EQ(y.shape(), (Shape{1, 3}));
  EXPECT_EQ(y[0], 1.5);
  EXPECT_EQ(y[1], 2.0);
  EXPECT_EQ(y[2], 2.0);
}

TEST(Conv, Im2colPathMatchesDirectLoop) {
  Rng rng(2);
  for (int stride : {1, 2})
    for (int pad : {0, 1, 2}) {
      const auto x = uniform_tensor<double>({2, 3, 7, 6}, rng, -1, 1);
      const auto w = uniform_tensor<double>({4, 3, 3, 3}, rng, -1, 1);
      const auto b = uniform_tensor<double>({4}, rng, -1, 1);
      Graph<double> g;
      const auto y = ops::conv2d(g.constant(x), g.constant(w), g.constant(b), stride, pad).value();
      const auto ref = naive_conv(x, w, &b, stride, pad);
      ASSERT_EQ(y.shape(), ref.shape());
      for (std::size_t i = 0; i < y.size(); ++i) EXPECT_NEAR(y[i], ref[i], 1e-13);
    }
}

TEST(Conv, DepthwiseActsPerChannel) {
  Rng rng(3);
  const auto x = uniform_tensor<double>({1, 2, 5, 5}, rng, -1, 1);
  const auto w = uniform_tensor<double>({2, 1, 3, 3}, rng, -1, 1);
  Graph<double> g;
  const auto y = ops::depthwise_conv2d(g.constant(x), g.constant(w)).value();
  for (int c = 0; c < 2; ++c) {
    Tensor<double> wc({1, 1, 3, 3});
    for (int i = 0; i < 9; ++i) wc[i] = w[c * 9 + i];
    const auto ref = naive_conv_same(channels_of(x, c, 1), wc);
    for (int i = 0; i < 25; ++i) EXPECT_NEAR(y[c * 25 + i], ref[i], 1e-14);
  }
}

TEST(Conv, RejectsChannelMismatch) {
  Graph<double> g;
  EXPECT_THROW(ops::conv2d_same(g.constant(Tensor<double>({1, 2, 4, 4})), g.constant(Tensor<double>({3, 1, 3, 3}))),
               ContractError);
}

TEST(Flops, ConvolutionsAreCountedInTheActiveScope) {
  Graph<double> g;
  {
    Graph<double>::Scope scope(g, "cell");
    ops::conv2d_same(g.constant(Tensor<double>({1, 2, 4, 4})), g.constant(Tensor<double>({3, 2, 3, 3})));
  }
  EXPECT_DOUBLE_EQ(g.flops().at("cell"), 2.0 * 3 * 2 * 9 * 16);
}
