#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "gmg/autograd.hpp"
#include "gmg/random.hpp"

namespace gmg {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst;  // "param[index]"
  std::size_t checked = 0;
};

/// Compares analytic parameter gradients of `loss_fn` with central differences.
/// Relative error is |a - n| / max(|a| + |n|, floor); the floor keeps round-off on
/// near-zero gradients from dominating. `scale_floor` raises it to that fraction of
/// the largest analytic gradient, for losses whose round-off grows with their size.
/// With `max_per_param` > 0 only
/// that many randomly chosen entries of each parameter are probed; with
/// `total_budget` > 0 the probes are drawn across all parameters instead.
struct GradCheckOptions {
  double step = 1e-5;
  double floor = 1e-6;
  double scale_floor = 0.0;
  std::size_t max_per_param = 0;
  std::size_t total_budget = 0;
  std::uint64_t seed = 7;
};

inline GradCheckResult grad_check(ParameterSet<double>& params, const std::function<Var<double>(Graph<double>&)>& loss_fn,
                                  const GradCheckOptions& opt = {}) {
  params.zero_grad();
  {
    Graph<double> g;
    g.backward(loss_fn(g));
  }
  auto eval = [&] {
    Graph<double> g;
    g.set_track_params(false);
    return loss_fn(g).value()[0];
  };

  std::vector<std::pair<std::size_t, std::size_t>> probes;
  Rng rng(opt.seed);
  if (opt.total_budget > 0) {
    const std::size_t total = params.total_size();
    for (std::size_t n = 0; n < opt.total_budget; ++n) {
      std::size_t flat = static_cast<std::size_t>(rng.next_u64() % total);
      for (std::size_t i = 0; i < params.count(); ++i) {
        if (flat < params[i].size()) {
          probes.emplace_back(i, flat);
          break;
        }
        flat -= params[i].size();
      }
    }
  } else {
    for (std::size_t i = 0; i < params.count(); ++i) {
      const std::size_t n = params[i].size();
      if (opt.max_per_param == 0 || n <= opt.max_per_param) {
        for (std::size_t j = 0; j < n; ++j) probes.emplace_back(i, j);
      } else {
        for (std::size_t k = 0; k < opt.max_per_param; ++k) probes.emplace_back(i, rng.next_u64() % n);
      }
    }
  }

  double floor = opt.floor;
  if (opt.scale_floor > 0) {
    double gmax = 0;
    for (const auto& p : params)
      for (double v : p->grad.values()) gmax = std::max(gmax, std::abs(v));
    floor = std::max(floor, opt.scale_floor * gmax);
  }

  GradCheckResult r;
  for (auto [i, j] : probes) {
    Parameter<double>& p = params[i];
    const double saved = p.value[j];
    p.value[j] = saved + opt.step;
    const double up = eval();
    p.value[j] = saved - opt.step;
    const double down = eval();
    p.value[j] = saved;
    const double numeric = (up - down) / (2 * opt.step);
    const double analytic = p.grad[j];
    const double rel = std::abs(analytic - numeric) / std::max(std::abs(analytic) + std::abs(numeric), floor);
    ++r.checked;
    if (rel > r.max_rel_error) {
      r.max_rel_error = rel;
      r.worst = p.name + "[" + std::to_string(j) + "]";
    }
  }
  return r;
}

}  // namespace gmg
