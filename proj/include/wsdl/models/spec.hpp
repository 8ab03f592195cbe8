#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "wsdl/core/error.hpp"
#include "wsdl/core/rng.hpp"

namespace wsdl {

enum class ModelKind { mlp, cifarcnn2, tinydecoder };

inline std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::mlp: return "mlp";
    case ModelKind::cifarcnn2: return "cifarcnn2";
    case ModelKind::tinydecoder: return "tinydecoder";
  }
  return "?";
}

inline ModelKind parse_model_kind(std::string_view s) {
  if (s == "mlp") return ModelKind::mlp;
  if (s == "cifarcnn2") return ModelKind::cifarcnn2;
  if (s == "tinydecoder") return ModelKind::tinydecoder;
  throw ConfigError("unknown model kind '" + std::string(s) + "'");
}

struct ModelSpec {
  ModelKind kind = ModelKind::mlp;

  // mlp: widths from input features to classes, e.g. {10, 16, 2}.
  std::vector<std::size_t> mlp_layers;

  // cifarcnn2: square RGB input side (divisible by 16) and class count.
  std::size_t image_size = 32;
  std::size_t num_classes = 10;

  // tinydecoder
  std::size_t vocab = 0;
  std::size_t context = 64;
  std::size_t width = 128;
  std::size_t blocks = 2;
  std::size_t heads = 4;

  std::uint64_t init_seed = 0;

  /// Architecture only; the init seed does not change compatibility.
  std::string canonical() const {
    std::string s = "kind=" + std::string(to_string(kind));
    switch (kind) {
      case ModelKind::mlp:
        s += ";layers=";
        for (std::size_t i = 0; i < mlp_layers.size(); ++i) s += (i ? "," : "") + std::to_string(mlp_layers[i]);
        break;
      case ModelKind::cifarcnn2:
        s += ";image=" + std::to_string(image_size) + ";classes=" + std::to_string(num_classes);
        break;
      case ModelKind::tinydecoder:
        s += ";vocab=" + std::to_string(vocab) + ";context=" + std::to_string(context) +
             ";width=" + std::to_string(width) + ";blocks=" + std::to_string(blocks) +
             ";heads=" + std::to_string(heads);
        break;
    }
    return s;
  }

  std::uint64_t digest() const { return fnv1a64(canonical()); }

  static ModelSpec mlp_spec(std::vector<std::size_t> layers, std::uint64_t seed = 0) {
    ModelSpec s;
    s.kind = ModelKind::mlp;
    s.mlp_layers = std::move(layers);
    s.init_seed = seed;
    return s;
  }

  static ModelSpec cifarcnn2_spec(std::size_t image_size = 32, std::uint64_t seed = 0) {
    ModelSpec s;
    s.kind = ModelKind::cifarcnn2;
    s.image_size = image_size;
    s.init_seed = seed;
    return s;
  }

  static ModelSpec tinydecoder_spec(std::size_t vocab, std::size_t context, std::size_t width = 128,
                                    std::size_t blocks = 2, std::size_t heads = 4, std::uint64_t seed = 0) {
    ModelSpec s;
    s.kind = ModelKind::tinydecoder;
    s.vocab = vocab;
    s.context = context;
    s.width = width;
    s.blocks = blocks;
    s.heads = heads;
    s.init_seed = seed;
    return s;
  }
};

}  // namespace wsdl
