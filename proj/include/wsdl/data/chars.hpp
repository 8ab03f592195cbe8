#pragma once

#include <algorithm>
#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>

#include "wsdl/core/error.hpp"
#include "wsdl/data/cifar10.hpp"
#include "wsdl/data/dataset.hpp"

namespace wsdl {

/// Cuts `text` into non-overlapping windows of `context` tokens. Example i holds
/// tokens [i*context, (i+1)*context) as inputs and the following token as its label,
/// so every input position has a next-token target. Tokens are bytes, renumbered
/// in sorted order of the bytes that occur.
inline Dataset char_windows(std::string_view text, std::size_t context) {
  if (context < 1) throw DataError(DataError::Kind::format, "char_windows: context must be >= 1");
  if (text.size() < context + 1)
    throw DataError(DataError::Kind::format, "char_windows: corpus shorter than one window");

  std::array<bool, 256> seen{};
  for (unsigned char c : text) seen[c] = true;
  std::array<int, 256> id{};
  Dataset d;
  for (int b = 0; b < 256; ++b) {
    if (seen[b]) {
      id[b] = static_cast<int>(d.vocabulary.size());
      d.vocabulary.push_back(static_cast<char>(b));
    }
  }
  d.num_classes = static_cast<int>(d.vocabulary.size());
  d.feature_shape = {context};
  d.provenance = Provenance::chars;
  const std::size_t n = (text.size() - 1) / context;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < context; ++j)
      d.inputs.push_back(static_cast<float>(id[static_cast<unsigned char>(text[i * context + j])]));
    d.labels.push_back(id[static_cast<unsigned char>(text[(i + 1) * context])]);
  }
  return d;
}

inline Dataset load_chars(const std::filesystem::path& file, std::size_t context) {
  const auto bytes = read_file_bytes(file);
  return char_windows(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()), context);
}

}  // namespace wsdl
