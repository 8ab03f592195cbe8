#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "wsdl/core/error.hpp"
#include "wsdl/data/dataset.hpp"

namespace wsdl {

enum class ParamRole { weight, bias, gain, embedding };

/// One named tensor inside the flat parameter vector.
struct ParamBlock {
  std::string name;
  std::size_t offset = 0;
  std::vector<std::size_t> shape;
  ParamRole role = ParamRole::weight;
  std::size_t fan_in = 0;  // weights and embeddings only

  std::size_t size() const { return shape_volume(shape); }
};

/// Contiguous, non-overlapping blocks covering [0, size()).
class Layout {
 public:
  std::size_t add(std::string name, std::vector<std::size_t> shape, ParamRole role, std::size_t fan_in = 0) {
    ParamBlock b{std::move(name), size_, std::move(shape), role, fan_in};
    if (b.size() == 0) throw ShapeError("parameter block '" + b.name + "' has zero size");
    size_ += b.size();
    blocks_.push_back(std::move(b));
    return blocks_.back().offset;
  }

  const std::vector<ParamBlock>& blocks() const noexcept { return blocks_; }
  std::size_t size() const noexcept { return size_; }

  const ParamBlock& find(const std::string& name) const {
    for (const auto& b : blocks_)
      if (b.name == name) return b;
    throw ShapeError("no parameter block named '" + name + "'");
  }

 private:
  std::vector<ParamBlock> blocks_;
  std::size_t size_ = 0;
};

}  // namespace wsdl
