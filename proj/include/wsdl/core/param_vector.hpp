#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

#include "wsdl/core/error.hpp"

namespace wsdl {

/// Flat single-precision vector of every model parameter (or of a same-shaped
/// quantity: gradient, optimizer moment, displacement).
class ParamVector {
 public:
  ParamVector() = default;
  explicit ParamVector(std::size_t d, float fill = 0.0f) : values_(d, fill) {}
  ParamVector(std::initializer_list<float> init) : values_(init) {}
  explicit ParamVector(std::vector<float> values) : values_(std::move(values)) {}

  /// Rounds each entry to single precision.
  static ParamVector from_double(std::span<const double> values) {
    ParamVector p(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) p.values_[i] = static_cast<float>(values[i]);
    return p;
  }

  std::size_t size() const noexcept { return values_.size(); }
  bool empty() const noexcept { return values_.empty(); }

  float& operator[](std::size_t i) noexcept { return values_[i]; }
  float operator[](std::size_t i) const noexcept { return values_[i]; }

  std::span<float> span() noexcept { return values_; }
  std::span<const float> span() const noexcept { return values_; }
  float* data() noexcept { return values_.data(); }
  const float* data() const noexcept { return values_.data(); }
  auto begin() noexcept { return values_.begin(); }
  auto end() noexcept { return values_.end(); }
  auto begin() const noexcept { return values_.begin(); }
  auto end() const noexcept { return values_.end(); }

  std::vector<double> to_double() const { return {values_.begin(), values_.end()}; }

  bool all_finite() const noexcept {
    for (float x : values_)
      if (!std::isfinite(x)) return false;
    return true;
  }

  friend bool operator==(const ParamVector&, const ParamVector&) = default;

 private:
  std::vector<float> values_;
};

}  // namespace wsdl
