#pragma once

#include <cfloat>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wsdl/core/error.hpp"
#include "wsdl/core/objective.hpp"
#include "wsdl/core/rng.hpp"
#include "wsdl/core/vector_ops.hpp"

namespace wsdl {

struct InterpPoint {
  double alpha = 0.0;
  double loss = 0.0;
};

/// L(α·b + (1−α)·a) at α = i/(n−1), i = 0..n−1. The endpoints are a and b exactly.
template <Objective F>
std::vector<InterpPoint> interpolate_loss(const F& f, std::span<const double> a, std::span<const double> b,
                                          std::size_t n_points) {
  detail::require_same_length(a.size(), b.size(), "interpolate_loss");
  if (n_points < 2) throw ConfigError("interpolate_loss: n_points must be >= 2");
  std::vector<InterpPoint> out(n_points);
  std::vector<double> x(a.size());
  for (std::size_t i = 0; i < n_points; ++i) {
    const double alpha = static_cast<double>(i) / static_cast<double>(n_points - 1);
    for (std::size_t j = 0; j < x.size(); ++j) x[j] = alpha * b[j] + (1.0 - alpha) * a[j];
    out[i] = {alpha, f.value(x)};
  }
  return out;
}

/// Finite-difference step for Hessian-vector products at x.
inline double hvp_step(std::span<const double> x) { return std::sqrt(static_cast<double>(FLT_EPSILON)) * (1.0 + norm(x)); }

/// ∇²f(x)·v by central differences of gradients along v/‖v‖.
template <Objective F>
std::vector<double> hvp(const F& f, std::span<const double> x, std::span<const double> v) {
  detail::require_same_length(x.size(), v.size(), "hvp");
  detail::require_same_length(x.size(), f.dimension(), "hvp");
  const double vn = norm(v);
  if (!(vn > 0.0)) throw NumericError("hvp: direction has zero norm");
  if (!std::isfinite(vn)) throw NumericError("hvp: direction is not finite");
  const double eps = hvp_step(x);
  const std::size_t d = x.size();
  std::vector<double> xp(d), xm(d), gp(d), gm(d);
  for (std::size_t i = 0; i < d; ++i) {
    const double step = eps * (v[i] / vn);
    xp[i] = x[i] + step;
    xm[i] = x[i] - step;
  }
  f.value_and_gradient(xp, gp);
  f.value_and_gradient(xm, gm);
  const double scale = vn / (2.0 * eps);
  std::vector<double> out(d);
  for (std::size_t i = 0; i < d; ++i) out[i] = (gp[i] - gm[i]) * scale;
  return out;
}

struct SharpnessOptions {
  double tol = 1e-3;
  std::size_t max_iter = 100;
  std::uint64_t seed = 0;
};

struct SharpnessResult {
  double lambda_max = 0.0;
  std::vector<double> eigvec;  // unit norm
  std::size_t iterations = 0;
  bool converged = false;
  /// The final Rayleigh quotient is negative: the dominant eigenvalue in
  /// magnitude is negative and the top eigenvalue was not isolated.
  bool negative = false;
  std::vector<double> rayleigh_history;
};

/// Power iteration on v ↦ ∇²f(x)v from a seeded random unit vector. Stops when
/// the Rayleigh quotient changes by less than tol relative, or the residual
/// ‖Hv − λv‖ falls to tol·|λ| (an exact eigenvector on the first iterate).
template <Objective F>
SharpnessResult sharpness(const F& f, std::span<const double> x, const SharpnessOptions& opt = {}) {
  if (!(opt.tol > 0.0)) throw ConfigError("sharpness: tol must be > 0");
  if (opt.max_iter == 0) throw ConfigError("sharpness: max_iter must be > 0");
  const std::size_t d = x.size();
  Rng rng(opt.seed, "sharpness");
  std::vector<double> v(d);
  for (auto& e : v) e = rng.normal();
  {
    const double n = norm(v);
    for (auto& e : v) e /= n;
  }

  SharpnessResult r;
  double prev = 0.0;
  for (std::size_t k = 1; k <= opt.max_iter; ++k) {
    const std::vector<double> w = hvp(f, x, v);
    const double lambda = dot(v, w);
    if (!std::isfinite(lambda)) throw NumericError("sharpness: non-finite Rayleigh quotient at iteration " + std::to_string(k));
    r.rayleigh_history.push_back(lambda);
    r.lambda_max = lambda;
    r.eigvec = v;
    r.iterations = k;

    double res2 = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      const double e = w[i] - lambda * v[i];
      res2 += e * e;
    }
    const bool small_change = k > 1 && std::abs(lambda - prev) < opt.tol * std::abs(lambda);
    const bool small_residual = std::sqrt(res2) <= opt.tol * std::abs(lambda);
    const double wn = norm(w);
    if (small_change || small_residual || wn == 0.0) {
      r.converged = wn != 0.0 || lambda == 0.0;
      break;
    }
    for (std::size_t i = 0; i < d; ++i) v[i] = w[i] / wn;
    prev = lambda;
  }
  r.negative = r.lambda_max < 0.0;
  return r;
}

/// ‖∇²f(x)·v̂‖ with v̂ = v/‖v‖.
template <Objective F>
double curvature_alignment(const F& f, std::span<const double> x, std::span<const double> v) {
  const std::vector<double> hv = hvp(f, x, v);
  return norm(hv) / norm(v);
}

}  // namespace wsdl
