#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wsdl/core/error.hpp"
#include "wsdl/data/dataset.hpp"
#include "wsdl/models/layers.hpp"
#include "wsdl/models/layout.hpp"
#include "wsdl/models/spec.hpp"

namespace wsdl {

/// Four blocks of Conv3x3(pad 1) -> ReLU -> MaxPool2, channel widths
/// 3 -> 32 -> 128 -> 128 -> 128, then a global spatial mean and Linear(128 -> classes).
/// Parameter tensors use the (out, in, kh, kw) layout.
class Cifarcnn2 {
 public:
  static constexpr std::array<std::size_t, 5> kChannels{3, 32, 128, 128, 128};
  static constexpr std::size_t kConvs = 4;

  explicit Cifarcnn2(const ModelSpec& spec) : image_(spec.image_size), classes_(spec.num_classes) {
    if (image_ == 0 || image_ % 16 != 0)
      throw ShapeError("cifarcnn2: image size must be a positive multiple of 16, got " + std::to_string(image_));
    if (classes_ < 2) throw ShapeError("cifarcnn2: need at least 2 classes");
    for (std::size_t i = 0; i < kConvs; ++i) {
      const auto name = "conv" + std::to_string(i + 1);
      layout_.add(name + ".weight", {kChannels[i + 1], kChannels[i], 3, 3}, ParamRole::weight, kChannels[i] * 9);
      layout_.add(name + ".bias", {kChannels[i + 1]}, ParamRole::bias);
    }
    layout_.add("fc1.weight", {classes_, kChannels[kConvs]}, ParamRole::weight, kChannels[kConvs]);
    layout_.add("fc1.bias", {classes_}, ParamRole::bias);
  }

  const Layout& layout() const noexcept { return layout_; }
  std::size_t num_classes() const noexcept { return classes_; }

  /// Side length of the feature map entering the spatial mean.
  std::size_t final_spatial() const noexcept { return image_ >> kConvs; }

  void check_batch(const Batch& batch) const {
    const std::vector<std::size_t> want{3, image_, image_};
    if (batch.feature_shape != want)
      throw ShapeError("cifarcnn2: expected inputs of shape 3x" + std::to_string(image_) + "x" +
                       std::to_string(image_));
  }

  nn::Mat logits(std::span<const double> params, const Batch& batch) const {
    check_batch(batch);
    nn::Mat out(static_cast<Eigen::Index>(batch.size()), static_cast<Eigen::Index>(classes_));
    Trace tr;
    for (std::size_t i = 0; i < batch.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = forward(params, batch, i, tr).transpose();
    return out;
  }

  /// Hash of every ReLU state and max-pool winner.
  std::uint64_t kink_signature(std::span<const double> params, const Batch& batch) const {
    check_batch(batch);
    std::uint64_t h = nn::kSignatureSeed;
    Trace tr;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      forward(params, batch, i, tr);
      for (std::size_t l = 0; l < kConvs; ++l) {
        nn::hash_positive_pattern(tr.activations[l], h);
        nn::hash_indices(tr.argmax[l], h);
      }
    }
    return h;
  }

  double evaluate(std::span<const double> params, const Batch& batch, std::span<double> grad) const {
    check_batch(batch);
    const double scale = 1.0 / static_cast<double>(batch.size());
    const bool want_grad = !grad.empty();
    double total = 0.0;
    Trace tr;
    nn::Vec dlogits(static_cast<Eigen::Index>(classes_));
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const nn::Vec out = forward(params, batch, i, tr);
      dlogits.setZero();
      total += nn::softmax_xent(out.data(), classes_, batch.labels[i], want_grad ? dlogits.data() : nullptr, scale);
      if (want_grad) backward(params, tr, dlogits, grad);
    }
    return total * scale;
  }

 private:
  // Per-example intermediates kept for the backward pass.
  struct Trace {
    std::array<nn::Mat, kConvs> cols;        // im2col of each conv input
    std::array<nn::Mat, kConvs> activations; // post-ReLU, pre-pool
    std::array<std::vector<std::uint32_t>, kConvs> argmax;
    nn::Mat pooled;                          // output of the last pool
    nn::Vec feature;                         // spatial mean
  };

  const ParamBlock& block(std::size_t i) const { return layout_.blocks()[i]; }

  nn::Vec forward(std::span<const double> params, const Batch& batch, std::size_t example, Trace& tr) const {
    const auto x = batch.input(example);
    std::vector<double> input(x.begin(), x.end());
    std::size_t side = image_;
    nn::Mat pooled;
    for (std::size_t l = 0; l < kConvs; ++l) {
      const double* src = l == 0 ? input.data() : pooled.data();
      nn::im2col3x3(src, kChannels[l], side, side, tr.cols[l]);
      nn::Mat z = nn::view(params, block(2 * l)) * tr.cols[l];
      z.colwise() += nn::view_vec(params, block(2 * l + 1));
      nn::relu_inplace(z);
      tr.activations[l] = std::move(z);
      nn::maxpool2(tr.activations[l], side, side, pooled, tr.argmax[l]);
      side /= 2;
    }
    tr.pooled = pooled;
    tr.feature = pooled.rowwise().mean();
    return nn::view(params, block(2 * kConvs)) * tr.feature + nn::view_vec(params, block(2 * kConvs + 1));
  }

  void backward(std::span<const double> params, const Trace& tr, const nn::Vec& dlogits, std::span<double> grad) const {
    const auto& fcw = block(2 * kConvs);
    nn::view(grad, fcw).noalias() += dlogits * tr.feature.transpose();
    nn::view_vec(grad, block(2 * kConvs + 1)) += dlogits;
    const nn::Vec dfeature = nn::view(params, fcw).transpose() * dlogits;

    const auto spatial = tr.pooled.cols();
    nn::Mat dpooled = dfeature.replicate(1, spatial) / static_cast<double>(spatial);
    std::size_t side = final_spatial() * 2;
    nn::Mat dact;
    for (std::size_t l = kConvs; l-- > 0;) {
      nn::maxpool2_backward(dpooled, tr.argmax[l], side, side, dact);
      nn::relu_backward(dact, tr.activations[l]);
      nn::view(grad, block(2 * l)).noalias() += dact * tr.cols[l].transpose();
      nn::view_vec(grad, block(2 * l + 1)) += dact.rowwise().sum();
      if (l == 0) break;
      const nn::Mat dcol = nn::view(params, block(2 * l)).transpose() * dact;
      dpooled.setZero(static_cast<Eigen::Index>(kChannels[l]), static_cast<Eigen::Index>(side * side));
      nn::col2im3x3_add(dcol, kChannels[l], side, side, dpooled.data());
      side *= 2;
    }
  }

  std::size_t image_;
  std::size_t classes_;
  Layout layout_;
};

}  // namespace wsdl
