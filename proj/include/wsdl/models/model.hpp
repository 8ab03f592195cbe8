#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "wsdl/core/error.hpp"
#include "wsdl/core/param_vector.hpp"
#include "wsdl/core/rng.hpp"
#include "wsdl/data/dataset.hpp"
#include "wsdl/models/cifarcnn2.hpp"
#include "wsdl/models/layers.hpp"
#include "wsdl/models/layout.hpp"
#include "wsdl/models/mlp.hpp"
#include "wsdl/models/spec.hpp"
#ifdef WSDL_ENABLE_TINYDECODER
#include "wsdl/models/tiny_decoder.hpp"
#endif

namespace wsdl {

/// Row-major logits; `rows` is the batch size (times context for the decoder).
struct Logits {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;

  double operator()(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

/// Immutable model descriptor: spec plus parameter layout. Evaluation is pure.
class Model {
 public:
#ifdef WSDL_ENABLE_TINYDECODER
  using Network = std::variant<Mlp, Cifarcnn2, TinyDecoder>;
#else
  using Network = std::variant<Mlp, Cifarcnn2>;
#endif

  explicit Model(ModelSpec spec) : spec_(std::move(spec)), net_(make(spec_)) {}

  const ModelSpec& spec() const noexcept { return spec_; }
  const Layout& layout() const { return std::visit([](const auto& n) -> const Layout& { return n.layout(); }, net_); }
  std::size_t dimension() const { return layout().size(); }
  std::size_t num_classes() const {
    return std::visit([](const auto& n) { return n.num_classes(); }, net_);
  }
  const Network& network() const noexcept { return net_; }

  void check_batch(const Batch& batch) const {
    if (batch.size() == 0) throw ShapeError("empty batch");
    std::visit([&](const auto& n) { n.check_batch(batch); }, net_);
  }

  /// Mean per-example loss; `grad` (length d) is overwritten unless empty.
  double evaluate(std::span<const double> params, const Batch& batch, std::span<double> grad) const {
    check_params(params.size());
    if (batch.size() == 0) throw ShapeError("empty batch");
    if (!grad.empty()) {
      if (grad.size() != dimension()) throw ShapeError("gradient buffer has wrong length");
      std::fill(grad.begin(), grad.end(), 0.0);
    }
    const double loss = std::visit([&](const auto& n) { return n.evaluate(params, batch, grad); }, net_);
    if (!std::isfinite(loss)) throw NumericError("non-finite loss");
    return loss;
  }

  /// Identifies the piecewise-smooth region (ReLU states, pool winners) that
  /// `params` falls in for this batch. Finite-difference checks use it to skip
  /// brackets that straddle a kink.
  std::uint64_t kink_signature(std::span<const double> params, const Batch& batch) const {
    check_params(params.size());
    return std::visit([&](const auto& n) { return n.kink_signature(params, batch); }, net_);
  }

  Logits logits(std::span<const double> params, const Batch& batch) const {
    check_params(params.size());
    if (batch.size() == 0) throw ShapeError("empty batch");
    const nn::Mat m = std::visit([&](const auto& n) { return n.logits(params, batch); }, net_);
    Logits out{static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols()), {}};
    out.values.assign(m.data(), m.data() + m.size());
    return out;
  }

 private:
  static Network make(const ModelSpec& s) {
    switch (s.kind) {
      case ModelKind::mlp: return Mlp(s);
      case ModelKind::cifarcnn2: return Cifarcnn2(s);
      case ModelKind::tinydecoder:
#ifdef WSDL_ENABLE_TINYDECODER
        return TinyDecoder(s);
#else
        throw ConfigError("tinydecoder support was not compiled in (WSDL_ENABLE_TINYDECODER)");
#endif
    }
    throw ConfigError("unknown model kind");
  }

  void check_params(std::size_t n) const {
    if (n != dimension())
      throw ShapeError("parameter vector has length " + std::to_string(n) + ", model expects " +
                       std::to_string(dimension()));
  }

  ModelSpec spec_;
  Network net_;
};

inline Model build_model(const ModelSpec& spec) { return Model(spec); }

/// Weights and embeddings ~ Uniform(-sqrt(6/fan_in), +sqrt(6/fan_in)), drawn in
/// layout order from the "init" stream; biases 0; layer-norm gains 1.
inline ParamVector init_params(const Model& model, std::uint64_t seed) {
  ParamVector p(model.dimension());
  Rng rng(seed, "init");
  for (const auto& b : model.layout().blocks()) {
    auto out = p.span().subspan(b.offset, b.size());
    switch (b.role) {
      case ParamRole::bias: std::fill(out.begin(), out.end(), 0.0f); break;
      case ParamRole::gain: std::fill(out.begin(), out.end(), 1.0f); break;
      case ParamRole::weight:
      case ParamRole::embedding: {
        const double bound = std::sqrt(6.0 / static_cast<double>(b.fan_in));
        for (float& x : out) {
          x = static_cast<float>(rng.uniform(-bound, bound));
          // Rounding to float can land one ulp outside the bound.
          if (std::abs(static_cast<double>(x)) > bound) x = std::nextafter(x, 0.0f);
        }
        break;
      }
    }
  }
  return p;
}

inline ParamVector init_params(const Model& model) { return init_params(model, model.spec().init_seed); }

struct Evaluation {
  double loss = 0.0;
  ParamVector grad;
};

/// Mean loss over `batch` and its exact gradient, rounded to storage precision.
inline Evaluation loss_and_gradient(const Model& model, const ParamVector& params, const Batch& batch) {
  const auto x = params.to_double();
  std::vector<double> g(model.dimension());
  Evaluation e;
  e.loss = model.evaluate(x, batch, g);
  e.grad = ParamVector::from_double(g);
  return e;
}

inline double loss(const Model& model, const ParamVector& params, const Batch& batch) {
  const auto x = params.to_double();
  return model.evaluate(x, batch, {});
}

inline Logits forward_logits(const Model& model, const ParamVector& params, const Batch& batch) {
  return model.logits(params.to_double(), batch);
}

/// A model's loss on one fixed batch, as an Objective over double parameters.
class BatchObjective {
 public:
  BatchObjective(const Model& model, const Batch& batch) : model_(&model), batch_(&batch) {
    model.check_batch(batch);
  }

  std::size_t dimension() const { return model_->dimension(); }
  double value(std::span<const double> x) const { return model_->evaluate(x, *batch_, {}); }
  double value_and_gradient(std::span<const double> x, std::span<double> grad) const {
    return model_->evaluate(x, *batch_, grad);
  }

 private:
  const Model* model_;
  const Batch* batch_;
};

}  // namespace wsdl
