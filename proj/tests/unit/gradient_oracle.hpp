#pragma once

// Central finite differences, kept independent of the models' backward passes.

#include <cmath>
#include <cstddef>
#include <vector>

#include "wsdl/wsdl.hpp"

namespace wsdl::testing {

struct CoordinateCheck {
  std::size_t index;
  double analytic;
  double numeric;
  double rel_error;
};

/// Single precision: parameters are perturbed in storage precision and the
/// actual (rounded) step is used in the quotient.
inline std::vector<CoordinateCheck> check_gradient_float(const Model& model, const ParamVector& params, const Batch& batch,
                                                         const std::vector<std::size_t>& coords, double eps = 1e-3) {
  const auto eval = loss_and_gradient(model, params, batch);
  std::vector<CoordinateCheck> out;
  for (std::size_t i : coords) {
    ParamVector plus = params, minus = params;
    plus[i] = static_cast<float>(params[i] + eps);
    minus[i] = static_cast<float>(params[i] - eps);
    const double step = static_cast<double>(plus[i]) - static_cast<double>(minus[i]);
    const double numeric = (loss(model, plus, batch) - loss(model, minus, batch)) / step;
    const double analytic = eval.grad[i];
    out.push_back({i, analytic, numeric, std::abs(analytic - numeric) / (std::abs(analytic) + 1e-6)});
  }
  return out;
}

/// Double precision parameters and step.
inline std::vector<CoordinateCheck> check_gradient_double(const Model& model, const std::vector<double>& params,
                                                          const Batch& batch, const std::vector<std::size_t>& coords,
                                                          double eps = 1e-5) {
  std::vector<double> g(model.dimension());
  model.evaluate(params, batch, g);
  std::vector<CoordinateCheck> out;
  for (std::size_t i : coords) {
    auto plus = params, minus = params;
    plus[i] += eps;
    minus[i] -= eps;
    const double numeric = (model.evaluate(plus, batch, {}) - model.evaluate(minus, batch, {})) / (plus[i] - minus[i]);
    out.push_back({i, g[i], numeric, std::abs(g[i] - numeric) / (std::abs(g[i]) + 1e-6)});
  }
  return out;
}

inline std::vector<std::size_t> random_coordinates(std::size_t d, std::size_t count, std::uint64_t seed) {
  Rng rng(seed, "coords");
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < count; ++k) out.push_back(static_cast<std::size_t>(rng.below(d)));
  return out;
}

/// True when x, x + eps*e_i and x - eps*e_i (in storage precision) all lie in the
/// same ReLU / max-pool region, i.e. the difference quotient does not straddle a kink.
inline bool smooth_bracket(const Model& model, const ParamVector& params, const Batch& batch, std::size_t i,
                           double eps) {
  ParamVector plus = params, minus = params;
  plus[i] = static_cast<float>(params[i] + eps);
  minus[i] = static_cast<float>(params[i] - eps);
  const auto at = model.kink_signature(params.to_double(), batch);
  return model.kink_signature(plus.to_double(), batch) == at && model.kink_signature(minus.to_double(), batch) == at;
}

/// `per_block` random coordinates from every parameter block, each with a
/// kink-free bracket of half-width `eps`.
inline std::vector<std::size_t> per_block_coordinates(const Model& model, const ParamVector& params, const Batch& batch,
                                                      std::size_t per_block, std::uint64_t seed, double eps = 1e-3) {
  Rng rng(seed, "block-coords");
  std::vector<std::size_t> out;
  for (const auto& b : model.layout().blocks()) {
    std::size_t found = 0;
    for (int attempt = 0; found < per_block && attempt < 40; ++attempt) {
      const std::size_t i = b.offset + static_cast<std::size_t>(rng.below(b.size()));
      if (!smooth_bracket(model, params, batch, i, eps)) continue;
      out.push_back(i);
      ++found;
    }
  }
  return out;
}

}  // namespace wsdl::testing
