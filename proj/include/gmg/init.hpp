#pragma once

#include <cmath>

#include "gmg/autograd.hpp"
#include "gmg/random.hpp"

namespace gmg {

/// Zero-mean uniform init with bound 1/sqrt(fan_in).
template <class T>
void init_fan_in(Parameter<T>& p, Rng& rng, int fan_in) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (auto& v : p.value.values()) v = static_cast<T>(rng.uniform(-bound, bound));
}

/// Fan-in of an OIHW convolution kernel (or an Out x In matrix).
template <class T>
int kernel_fan_in(const Parameter<T>& p) {
  int f = 1;
  for (int i = 1; i < p.value.rank(); ++i) f *= p.value.dim(i);
  return f;
}

template <class T>
void init_kernel(Parameter<T>& p, Rng& rng) {
  init_fan_in(p, rng, kernel_fan_in(p));
}

template <class T>
Var<T> maybe_param(Graph<T>& g, Parameter<T>* p) {
  return p ? g.param(*p) : Var<T>{};
}

template <class T>
void require_finite_params(std::initializer_list<const Parameter<T>*> ps) {
  for (const auto* p : ps)
    if (p && !p->value.all_finite()) throw NumericError("non-finite values in parameter " + p->name);
}

}  // namespace gmg
