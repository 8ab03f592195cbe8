#pragma once

#include <concepts>
#include <cstddef>
#include <span>

namespace wsdl {

/// A differentiable scalar function of a flat parameter vector. Every diagnostic
/// is written against this, so analytic test functions and network losses on a
/// fixed probe batch are interchangeable.
///
/// `value_and_gradient` writes ∇f(x) into `grad` (same length as x) and returns
/// f(x). Both calls must be pure.
template <class F>
concept Objective = requires(const F& f, std::span<const double> x, std::span<double> grad) {
  { f.dimension() } -> std::convertible_to<std::size_t>;
  { f.value(x) } -> std::convertible_to<double>;
  { f.value_and_gradient(x, grad) } -> std::convertible_to<double>;
};

}  // namespace wsdl
