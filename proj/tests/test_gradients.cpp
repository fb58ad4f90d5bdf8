#include <gtest/gtest.h>

#include "gmg/gradcheck.hpp"
#include "gmg/model.hpp"
#include "test_util.hpp"

using namespace gmg;
using gmg::testing::random_input;
using gmg::testing::randomize;

namespace {

Var<double> project(Graph<double>& g, const Var<double>& y, std::uint64_t seed) {
  Rng rng(seed);
  (void)g;
  return ops::dot_with(y, uniform_tensor<double>(y.shape(), rng, -1, 1));
}

}  // namespace

TEST(GradCheck, StConvLstmCell) {
  ParameterSet<double> ps;
  auto p = StConvLstmParams<double>::create(ps, "cell.", 2, 3, 3);
  Rng rng(11);
  randomize(ps, rng);
  auto& x = random_input(ps, "x", {1, 2, 4, 4}, rng);
  auto& h = random_input(ps, "h", {1, 3, 4, 4}, rng);
  auto& c = random_input(ps, "c", {1, 3, 4, 4}, rng);
  auto& m = random_input(ps, "m", {1, 3, 4, 4}, rng);
  auto r = grad_check(ps, [&](Graph<double>& g) {
    auto s = st_convlstm_step(g, p, g.param(x), g.param(h), g.param(c), g.param(m));
    return ops::add(project(g, s.h, 1), project(g, s.c, 2), project(g, s.m, 3));
  });
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
}

TEST(GradCheck, GlobalFocusModule) {
  ParameterSet<double> ps;
  auto p = GfmParams<double>::create(ps, "gfm.", 2, 3);
  Rng rng(12);
  randomize(ps, rng);
  auto& x = random_input(ps, "x", {1, 2, 4, 4}, rng);
  auto& h = random_input(ps, "h", {1, 3, 4, 4}, rng);
  auto r = grad_check(ps, [&](Graph<double>& g) { return project(g, gfm_forward(g, p, g.param(x), g.param(h)), 4); });
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
}

TEST(GradCheck, SimplifiedGfm) {
  ParameterSet<double> ps;
  auto p = GfmSimpleParams<double>::create(ps, "gfm.", 2, 3);
  Rng rng(13);
  randomize(ps, rng);
  auto& x = random_input(ps, "x", {1, 2, 4, 4}, rng);
  auto& h = random_input(ps, "h", {1, 3, 4, 4}, rng);
  auto r = grad_check(ps, [&](Graph<double>& g) { return project(g, gfm_simple(g, p, g.param(x), g.param(h)), 5); });
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
}

TEST(GradCheck, SelfAttentionMemory) {
  ParameterSet<double> ps;
  auto p = SamParams<double>::create(ps, "sam.", 3, 2, 3);
  Rng rng(14);
  randomize(ps, rng);
  auto& h = random_input(ps, "h", {1, 3, 4, 4}, rng);
  auto& m = random_input(ps, "m", {1, 3, 4, 4}, rng);
  auto r = grad_check(ps, [&](Graph<double>& g) {
    auto s = sam_forward(g, p, g.param(h), g.param(m));
    return ops::add(project(g, s.h, 6), project(g, s.m, 7));
  });
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
}

TEST(GradCheck, MotionGuidedModule) {
  ParameterSet<double> ps;
  auto p = MgmParams<double>::create(ps, "mgm.", 4, 3);
  Rng rng(15);
  randomize(ps, rng);
  auto& h = random_input(ps, "h", {1, 4, 4, 4}, rng);
  auto& f = random_input(ps, "f", {1, 18, 2, 2}, rng);
  auto& d = random_input(ps, "d", {1, 18, 2, 2}, rng);
  auto r = grad_check(ps, [&](Graph<double>& g) {
    auto o = mgm_forward(g, p, g.param(h), MotionState<double>{g.param(f), g.param(d)}, 2);
    return ops::add(project(g, o.x_out, 8), project(g, o.state.f, 9), project(g, o.state.d, 10));
  });
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
}

TEST(GradCheck, GradientHighway) {
  ParameterSet<double> ps;
  auto p = GhuParams<double>::create(ps, "ghu.", 3, 3);
  Rng rng(16);
  randomize(ps, rng);
  auto& x = random_input(ps, "x", {1, 3, 4, 4}, rng);
  auto& z = random_input(ps, "z", {1, 3, 4, 4}, rng);
  auto r = grad_check(ps, [&](Graph<double>& g) { return project(g, ghu_step(g, p, g.param(x), g.param(z)), 11); });
  EXPECT_LT(r.max_rel_error, 1e-4) << r.worst;
}

class GradCheckModel : public ::testing::TestWithParam<std::string> {};

TEST_P(GradCheckModel, TwoLayerRolloutLoss) {
  ModelConfig c = ModelConfig::for_variant(GetParam());
  c.num_layers = 2, c.hidden = 4, c.patch = 2, c.height = c.width = 8, c.t_in = 2, c.t_out = 2, c.att_hidden = 2, c.gate_kernel = 3;
  c.ghu = true;
  GmgModel<double> model(c);
  Rng rng(21);
  model.init(rng);
  const Tensor<double> seq = patchify(uniform_tensor<double>({1, 4, 1, 8, 8}, rng, 0, 1), 2);
  const Tensor<double> target = time_slice(seq, 2, 4);
  GradCheckOptions opt;
  opt.total_budget = 32;
  opt.scale_floor = 1e-6;
  auto r = grad_check(model.params(), [&](Graph<double>& g) {
    auto preds = model.rollout(g, seq);
    std::vector<Var<double>> terms;
    for (int t = 0; t < 2; ++t) terms.push_back(ops::sum_squared_error(preds[t], frame_at(target, t)));
    return ops::add_scalars(terms);
  }, opt);
  EXPECT_EQ(r.checked, 32u);
  EXPECT_LT(r.max_rel_error, 1e-3) << r.worst;
}

INSTANTIATE_TEST_SUITE_P(Variants, GradCheckModel, ::testing::Values("L", "m", "s"));
