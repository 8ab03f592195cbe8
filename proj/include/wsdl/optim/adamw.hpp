#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>

#include "wsdl/core/error.hpp"
#include "wsdl/core/param_vector.hpp"

namespace wsdl {

struct AdamWHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;

  friend bool operator==(const AdamWHyper&, const AdamWHyper&) = default;
};

struct AdamWState {
  ParamVector m;
  ParamVector v;
  std::uint64_t t = 0;
  AdamWHyper hyper;

  static AdamWState fresh(std::size_t d, const AdamWHyper& hyper) { return {ParamVector(d), ParamVector(d), 0, hyper}; }

  friend bool operator==(const AdamWState&, const AdamWState&) = default;
};

/// One AdamW update in place. Moments and parameters are stored in single
/// precision; the arithmetic for each entry is done in double.
///
///   m <- b1 m + (1-b1) g,  v <- b2 v + (1-b2) g^2
///   x <- x - lr * mhat / (sqrt(vhat) + eps) - lr * wd * x
///
/// With a zero gradient on a fresh state, mhat / (sqrt(vhat) + eps) = 0 / eps = 0.
inline void adamw_step(ParamVector& params, AdamWState& state, const ParamVector& grad, double lr) {
  const std::size_t d = params.size();
  if (grad.size() != d || state.m.size() != d || state.v.size() != d)
    throw ShapeError("adamw_step: parameter, gradient and moment lengths differ");
  if (!(lr >= 0.0)) throw ConfigError("adamw_step: learning rate must be >= 0");
  if (!grad.all_finite()) throw NumericError("adamw_step: non-finite gradient", state.t);

  const auto& h = state.hyper;
  const std::uint64_t t = state.t + 1;
  const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(t));
  for (std::size_t i = 0; i < d; ++i) {
    const double g = grad[i];
    const double m = h.beta1 * state.m[i] + (1.0 - h.beta1) * g;
    const double v = h.beta2 * state.v[i] + (1.0 - h.beta2) * g * g;
    state.m[i] = static_cast<float>(m);
    state.v[i] = static_cast<float>(v);
    const double mhat = m / c1;
    const double vhat = v / c2;
    const double x = params[i];
    params[i] = static_cast<float>(x - lr * (mhat / (std::sqrt(vhat) + h.eps)) - lr * h.weight_decay * x);
  }
  state.t = t;
}

}  // namespace wsdl
