#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wsdl/core/error.hpp"

namespace wsdl {

enum class Provenance { cifar10, synthetic, chars };

inline std::string_view to_string(Provenance p) {
  switch (p) {
    case Provenance::cifar10: return "cifar10";
    case Provenance::synthetic: return "synthetic";
    case Provenance::chars: return "chars";
  }
  return "?";
}

inline std::size_t shape_volume(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

/// Examples stored contiguously: example i occupies inputs[i*F, (i+1)*F) with
/// F = volume(feature_shape). Immutable once built.
struct Dataset {
  std::vector<float> inputs;
  std::vector<std::size_t> feature_shape;
  std::vector<std::int32_t> labels;
  int num_classes = 0;
  Provenance provenance = Provenance::synthetic;
  std::string vocabulary;  // chars datasets only: token id -> byte

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t feature_size() const { return shape_volume(feature_shape); }

  std::span<const float> input(std::size_t i) const {
    const std::size_t f = feature_size();
    return std::span<const float>(inputs).subspan(i * f, f);
  }

  void validate() const {
    if (labels.empty()) throw DataError(DataError::Kind::format, "dataset is empty");
    if (num_classes < 1) throw DataError(DataError::Kind::format, "dataset has no classes");
    if (inputs.size() != labels.size() * feature_size())
      throw DataError(DataError::Kind::format, "dataset inputs do not match labels x feature shape");
    for (auto y : labels)
      if (y < 0 || y >= num_classes)
        throw DataError(DataError::Kind::corruption, "label " + std::to_string(y) + " outside [0, " +
                                                         std::to_string(num_classes) + ")");
  }
};

/// Materialized subset of a dataset, in the order given.
struct Batch {
  std::vector<float> inputs;
  std::vector<std::size_t> feature_shape;
  std::vector<std::int32_t> labels;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t feature_size() const { return shape_volume(feature_shape); }
  std::span<const float> input(std::size_t i) const {
    const std::size_t f = feature_size();
    return std::span<const float>(inputs).subspan(i * f, f);
  }
};

inline Batch gather(const Dataset& data, std::span<const std::size_t> indices) {
  Batch b;
  b.feature_shape = data.feature_shape;
  const std::size_t f = data.feature_size();
  b.inputs.reserve(indices.size() * f);
  b.labels.reserve(indices.size());
  for (std::size_t idx : indices) {
    if (idx >= data.size()) throw ShapeError("gather: index " + std::to_string(idx) + " out of range");
    auto x = data.input(idx);
    b.inputs.insert(b.inputs.end(), x.begin(), x.end());
    b.labels.push_back(data.labels[idx]);
  }
  return b;
}

inline Batch whole(const Dataset& data) {
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return gather(data, idx);
}

}  // namespace wsdl
