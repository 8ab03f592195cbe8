#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "wsdl/core/error.hpp"
#include "wsdl/core/objective.hpp"
#include "wsdl/core/vector_ops.hpp"

namespace wsdl {

inline constexpr double kTauSkipDelta = 1e-8;

enum class SeriesFlag { ok, skipped, negative_denominator, zero_displacement, zero_gradient };

inline std::string_view to_string(SeriesFlag f) {
  switch (f) {
    case SeriesFlag::ok: return "ok";
    case SeriesFlag::skipped: return "skipped";
    case SeriesFlag::negative_denominator: return "negative_denominator";
    case SeriesFlag::zero_displacement: return "zero_displacement";
    case SeriesFlag::zero_gradient: return "zero_gradient";
  }
  return "?";
}

struct SeriesRecord {
  std::uint64_t step = 0;
  std::optional<double> value;
  SeriesFlag flag = SeriesFlag::ok;
};

/// A parameter point tagged with its training step.
struct Iterate {
  std::uint64_t step = 0;
  std::vector<double> x;
};

/// τᵢ = −∇L(xᵢ)·(x* − xᵢ) / (L(xᵢ) − L(x*)).
template <Objective F>
std::vector<SeriesRecord> tau_series(const F& f, const std::vector<Iterate>& iterates, std::span<const double> x_star,
                                     double delta = kTauSkipDelta) {
  const double l_star = f.value(x_star);
  std::vector<double> g(f.dimension());
  std::vector<SeriesRecord> out;
  out.reserve(iterates.size());
  for (const auto& it : iterates) {
    detail::require_same_length(it.x.size(), x_star.size(), "tau_series");
    const double li = f.value_and_gradient(it.x, g);
    const double denom = li - l_star;
    SeriesRecord r{it.step, std::nullopt, SeriesFlag::ok};
    if (std::abs(denom) < delta) {
      r.flag = SeriesFlag::skipped;
    } else {
      double num = 0.0;
      for (std::size_t j = 0; j < g.size(); ++j) num += g[j] * (x_star[j] - it.x[j]);
      r.value = -num / denom;
      if (denom < 0.0) r.flag = SeriesFlag::negative_denominator;
    }
    out.push_back(r);
  }
  return out;
}

/// cos(−∇L(xᵢ), x_{i+1} − xᵢ) for each consecutive pair, reported at step i.
template <Objective F>
std::vector<SeriesRecord> update_cosine_series(const F& f, const std::vector<Iterate>& iterates) {
  std::vector<SeriesRecord> out;
  if (iterates.size() < 2) return out;
  std::vector<double> g(f.dimension());
  for (std::size_t i = 0; i + 1 < iterates.size(); ++i) {
    const auto& a = iterates[i].x;
    const auto& b = iterates[i + 1].x;
    const auto disp = difference(std::span<const double>(b), std::span<const double>(a));
    f.value_and_gradient(a, g);
    for (auto& e : g) e = -e;
    SeriesRecord r{iterates[i].step, std::nullopt, SeriesFlag::ok};
    if (norm(disp) == 0.0)
      r.flag = SeriesFlag::zero_displacement;
    else if (norm(g) == 0.0)
      r.flag = SeriesFlag::zero_gradient;
    else
      r.value = cosine_similarity(g, disp);
    out.push_back(r);
  }
  return out;
}

struct NormRecord {
  std::uint64_t step = 0;
  double param_norm = 0.0;
  std::optional<double> update_norm;  // ‖x_{i+1} − x_i‖; absent on the last row
};

inline std::vector<NormRecord> param_norm_series(const std::vector<Iterate>& iterates) {
  if (iterates.empty()) throw ConfigError("param_norm_series: need at least one checkpoint");
  std::vector<NormRecord> out;
  for (std::size_t i = 0; i < iterates.size(); ++i) {
    NormRecord r{iterates[i].step, norm(iterates[i].x), std::nullopt};
    if (i + 1 < iterates.size())
      r.update_norm = distance(std::span<const double>(iterates[i + 1].x), std::span<const double>(iterates[i].x));
    out.push_back(r);
  }
  return out;
}

}  // namespace wsdl
