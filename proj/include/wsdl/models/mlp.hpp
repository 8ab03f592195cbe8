#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "wsdl/core/error.hpp"
#include "wsdl/data/dataset.hpp"
#include "wsdl/models/layers.hpp"
#include "wsdl/models/layout.hpp"
#include "wsdl/models/spec.hpp"

namespace wsdl {

/// Fully connected ReLU network with a softmax cross-entropy head.
/// Layer l holds fc{l}.weight (out x in, row-major) followed by fc{l}.bias.
class Mlp {
 public:
  explicit Mlp(const ModelSpec& spec) : widths_(spec.mlp_layers) {
    if (widths_.size() < 2) throw ShapeError("mlp: need at least input and output widths");
    for (std::size_t w : widths_)
      if (w == 0) throw ShapeError("mlp: zero-width layer");
    if (widths_.back() < 2) throw ShapeError("mlp: need at least 2 output classes");
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
      const auto name = "fc" + std::to_string(l + 1);
      layout_.add(name + ".weight", {widths_[l + 1], widths_[l]}, ParamRole::weight, widths_[l]);
      layout_.add(name + ".bias", {widths_[l + 1]}, ParamRole::bias);
    }
  }

  const Layout& layout() const noexcept { return layout_; }
  std::size_t num_classes() const noexcept { return widths_.back(); }

  void check_batch(const Batch& batch) const {
    if (batch.feature_size() != widths_.front())
      throw ShapeError("mlp: expected " + std::to_string(widths_.front()) + " input features, got " +
                       std::to_string(batch.feature_size()));
  }

  /// B x classes logits.
  nn::Mat logits(std::span<const double> params, const Batch& batch) const {
    std::vector<nn::Mat> acts;
    forward(params, batch, acts);
    return acts.back();
  }

  /// Hash of every ReLU on/off state; constant within one linear region.
  std::uint64_t kink_signature(std::span<const double> params, const Batch& batch) const {
    std::vector<nn::Mat> acts;
    forward(params, batch, acts);
    std::uint64_t h = nn::kSignatureSeed;
    for (std::size_t l = 1; l + 1 < acts.size(); ++l) nn::hash_positive_pattern(acts[l], h);
    return h;
  }

  /// Mean cross-entropy over the batch; fills `grad` (length d) unless it is empty.
  double evaluate(std::span<const double> params, const Batch& batch, std::span<double> grad) const {
    std::vector<nn::Mat> acts;
    forward(params, batch, acts);
    const nn::Mat& out = acts.back();
    const auto rows = static_cast<std::size_t>(out.rows());
    const std::size_t classes = num_classes();
    const double scale = 1.0 / static_cast<double>(rows);
    const bool want_grad = !grad.empty();

    nn::Mat delta;
    if (want_grad) delta = nn::Mat::Zero(out.rows(), out.cols());
    double total = 0.0;
    for (std::size_t i = 0; i < rows; ++i)
      total += nn::softmax_xent(out.row(static_cast<Eigen::Index>(i)).data(), classes, batch.labels[i],
                                want_grad ? delta.row(static_cast<Eigen::Index>(i)).data() : nullptr, scale);
    if (!want_grad) return total * scale;

    const std::size_t layers = widths_.size() - 1;
    for (std::size_t l = layers; l-- > 0;) {
      const auto& wb = layout_.blocks()[2 * l];
      const auto& bb = layout_.blocks()[2 * l + 1];
      nn::view(grad, wb).noalias() = delta.transpose() * acts[l];
      nn::view_vec(grad, bb) = delta.colwise().sum().transpose();
      if (l == 0) break;
      nn::Mat prev = delta * nn::view(params, wb);
      nn::relu_backward(prev, acts[l]);
      delta = std::move(prev);
    }
    return total * scale;
  }

 private:
  void forward(std::span<const double> params, const Batch& batch, std::vector<nn::Mat>& acts) const {
    check_batch(batch);
    const auto rows = static_cast<Eigen::Index>(batch.size());
    acts.clear();
    acts.emplace_back(rows, static_cast<Eigen::Index>(widths_.front()));
    for (Eigen::Index i = 0; i < acts[0].size(); ++i) acts[0].data()[i] = batch.inputs[static_cast<std::size_t>(i)];
    const std::size_t layers = widths_.size() - 1;
    for (std::size_t l = 0; l < layers; ++l) {
      const auto& wb = layout_.blocks()[2 * l];
      const auto& bb = layout_.blocks()[2 * l + 1];
      nn::Mat z = acts[l] * nn::view(params, wb).transpose();
      z.rowwise() += nn::view_vec(params, bb).transpose();
      if (l + 1 < layers) nn::relu_inplace(z);
      acts.push_back(std::move(z));
    }
  }

  std::vector<std::size_t> widths_;
  Layout layout_;
};

}  // namespace wsdl
