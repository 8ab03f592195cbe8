#pragma once

// Reductions over parameter-sized vectors. Whatever the storage type, products
// and sums are accumulated in double, left to right.

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "wsdl/core/error.hpp"
#include "wsdl/core/param_vector.hpp"

namespace wsdl {

namespace detail {

inline void require_same_length(std::size_t a, std::size_t b, const char* op) {
  if (a != b)
    throw ShapeError(std::string(op) + ": length mismatch (" + std::to_string(a) + " vs " +
                     std::to_string(b) + ")");
}

}  // namespace detail

template <class A, class B>
double dot(std::span<const A> a, std::span<const B> b) {
  detail::require_same_length(a.size(), b.size(), "dot");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return acc;
}

inline double dot(const ParamVector& a, const ParamVector& b) { return dot(a.span(), b.span()); }
inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return dot(std::span<const double>(a), std::span<const double>(b));
}

template <class A>
double norm(std::span<const A> a) {
  return std::sqrt(dot(a, a));
}
inline double norm(const ParamVector& a) { return norm(a.span()); }
inline double norm(const std::vector<double>& a) { return norm(std::span<const double>(a)); }

/// ‖a − b‖₂ with the difference formed in double.
template <class A, class B>
double distance(std::span<const A> a, std::span<const B> b) {
  detail::require_same_length(a.size(), b.size(), "distance");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - static_cast<double>(b[i]);
    acc += d * d;
  }
  return std::sqrt(acc);
}
inline double distance(const ParamVector& a, const ParamVector& b) { return distance(a.span(), b.span()); }
inline double distance(const std::vector<double>& a, const std::vector<double>& b) {
  return distance(std::span<const double>(a), std::span<const double>(b));
}

/// a·b / (‖a‖‖b‖), clamped to [-1, 1]. Zero-norm input is an error.
template <class A, class B>
double cosine_similarity(std::span<const A> a, std::span<const B> b) {
  detail::require_same_length(a.size(), b.size(), "cosine_similarity");
  const double na = norm(a);
  const double nb = norm(b);
  if (na == 0.0 || nb == 0.0) throw NumericError("cosine_similarity: zero-norm input");
  const double c = dot(a, b) / (na * nb);
  return c > 1.0 ? 1.0 : (c < -1.0 ? -1.0 : c);
}
inline double cosine_similarity(const ParamVector& a, const ParamVector& b) {
  return cosine_similarity(a.span(), b.span());
}
inline double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  return cosine_similarity(std::span<const double>(a), std::span<const double>(b));
}

/// b − a in double.
template <class T>
std::vector<double> difference(std::span<const T> b, std::span<const T> a) {
  detail::require_same_length(a.size(), b.size(), "difference");
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = static_cast<double>(b[i]) - static_cast<double>(a[i]);
  return out;
}

inline std::vector<double> difference(const ParamVector& b, const ParamVector& a) {
  return difference<float>(b.span(), a.span());
}

}  // namespace wsdl
