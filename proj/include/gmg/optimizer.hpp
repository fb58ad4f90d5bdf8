#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "gmg/autograd.hpp"

namespace gmg {

enum class OptimizerKind { Adam, Sgd };

inline OptimizerKind parse_optimizer(const std::string& s) {
  if (s == "adam") return OptimizerKind::Adam;
  if (s == "sgd") return OptimizerKind::Sgd;
  throw ConfigError("unknown optimizer '" + s + "' (expected adam|sgd)");
}

inline std::string to_string(OptimizerKind k) { return k == OptimizerKind::Adam ? "adam" : "sgd"; }

struct AdamState {
  long step = 0;
  std::vector<std::vector<float>> m, v;
};

/// Adam (bias-corrected) or plain SGD over a float parameter set. Moments are
/// kept in the parameter registration order so they can be checkpointed.
class Optimizer {
 public:
  Optimizer(OptimizerKind kind, double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : kind_(kind), lr_(lr), b1_(beta1), b2_(beta2), eps_(eps) {
    if (!(lr >= 0.0)) throw ConfigError("learning rate must be >= 0");
  }

  void bind(const ParameterSet<float>& params) {
    state_.m.clear();
    state_.v.clear();
    for (const auto& p : params) {
      state_.m.emplace_back(p->size(), 0.0f);
      state_.v.emplace_back(p->size(), 0.0f);
    }
  }

  /// Rescales all gradients so their global L2 norm is at most `max_norm`; returns the pre-clip norm.
  static double clip_grad_norm(ParameterSet<float>& params, double max_norm) {
    double sq = 0.0;
    for (const auto& p : params)
      for (float g : p->grad.values()) sq += static_cast<double>(g) * g;
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
      const float s = static_cast<float>(max_norm / norm);
      for (auto& p : params)
        for (float& g : p->grad.values()) g *= s;
    }
    return norm;
  }

  void step(ParameterSet<float>& params) {
    if (state_.m.size() != params.count()) bind(params);
    ++state_.step;
    if (lr_ == 0.0) return;
    const double c1 = 1.0 - std::pow(b1_, static_cast<double>(state_.step));
    const double c2 = 1.0 - std::pow(b2_, static_cast<double>(state_.step));
    for (std::size_t i = 0; i < params.count(); ++i) {
      Parameter<float>& p = params[i];
      if (kind_ == OptimizerKind::Sgd) {
        for (std::size_t j = 0; j < p.size(); ++j) p.value[j] -= static_cast<float>(lr_) * p.grad[j];
        continue;
      }
      auto& m = state_.m[i];
      auto& v = state_.v[i];
      for (std::size_t j = 0; j < p.size(); ++j) {
        const double g = p.grad[j];
        m[j] = static_cast<float>(b1_ * m[j] + (1.0 - b1_) * g);
        v[j] = static_cast<float>(b2_ * v[j] + (1.0 - b2_) * g * g);
        const double mh = m[j] / c1, vh = v[j] / c2;
        p.value[j] -= static_cast<float>(lr_ * mh / (std::sqrt(vh) + eps_));
      }
    }
  }

  OptimizerKind kind() const { return kind_; }
  double lr() const { return lr_; }
  AdamState& state() { return state_; }
  const AdamState& state() const { return state_; }

 private:
  OptimizerKind kind_;
  double lr_, b1_, b2_, eps_;
  AdamState state_;
};

}  // namespace gmg
