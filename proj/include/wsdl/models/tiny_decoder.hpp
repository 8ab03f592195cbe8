#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "wsdl/core/error.hpp"
#include "wsdl/data/dataset.hpp"
#include "wsdl/models/layers.hpp"
#include "wsdl/models/layout.hpp"
#include "wsdl/models/spec.hpp"

namespace wsdl {

/// Pre-norm decoder-only transformer over a character vocabulary: learned token
/// and position embeddings, `blocks` x (causal multi-head attention + ReLU MLP of
/// width 4*width), final layer norm, untied output head.
///
/// An example is `context` token ids plus a label; position j is trained to
/// predict token j+1 and the last position predicts the label. The per-example
/// loss is the mean over positions.
class TinyDecoder {
 public:
  explicit TinyDecoder(const ModelSpec& spec)
      : vocab_(spec.vocab), context_(spec.context), width_(spec.width), heads_(spec.heads) {
    if (vocab_ < 2) throw ShapeError("tinydecoder: vocabulary must have at least 2 symbols");
    if (context_ == 0 || width_ == 0 || spec.blocks == 0 || heads_ == 0)
      throw ShapeError("tinydecoder: context, width, blocks and heads must be positive");
    if (width_ % heads_ != 0) throw ShapeError("tinydecoder: width must be divisible by heads");

    tok_ = layout_.blocks().size();
    layout_.add("tok_emb", {vocab_, width_}, ParamRole::embedding, width_);
    layout_.add("pos_emb", {context_, width_}, ParamRole::embedding, width_);
    for (std::size_t b = 0; b < spec.blocks; ++b) {
      const auto p = "h" + std::to_string(b) + ".";
      BlockIds ids;
      ids.ln1_g = add(p + "ln1.gain", {width_}, ParamRole::gain);
      ids.ln1_b = add(p + "ln1.bias", {width_}, ParamRole::bias);
      ids.qkv_w = add(p + "attn.qkv.weight", {3 * width_, width_}, ParamRole::weight, width_);
      ids.qkv_b = add(p + "attn.qkv.bias", {3 * width_}, ParamRole::bias);
      ids.proj_w = add(p + "attn.proj.weight", {width_, width_}, ParamRole::weight, width_);
      ids.proj_b = add(p + "attn.proj.bias", {width_}, ParamRole::bias);
      ids.ln2_g = add(p + "ln2.gain", {width_}, ParamRole::gain);
      ids.ln2_b = add(p + "ln2.bias", {width_}, ParamRole::bias);
      ids.fc_w = add(p + "mlp.fc.weight", {4 * width_, width_}, ParamRole::weight, width_);
      ids.fc_b = add(p + "mlp.fc.bias", {4 * width_}, ParamRole::bias);
      ids.out_w = add(p + "mlp.proj.weight", {width_, 4 * width_}, ParamRole::weight, 4 * width_);
      ids.out_b = add(p + "mlp.proj.bias", {width_}, ParamRole::bias);
      blocks_.push_back(ids);
    }
    lnf_g_ = add("lnf.gain", {width_}, ParamRole::gain);
    lnf_b_ = add("lnf.bias", {width_}, ParamRole::bias);
    head_w_ = add("head.weight", {vocab_, width_}, ParamRole::weight, width_);
    head_b_ = add("head.bias", {vocab_}, ParamRole::bias);
  }

  const Layout& layout() const noexcept { return layout_; }
  std::size_t num_classes() const noexcept { return vocab_; }

  void check_batch(const Batch& batch) const {
    if (batch.feature_shape != std::vector<std::size_t>{context_})
      throw ShapeError("tinydecoder: expected sequences of length " + std::to_string(context_));
    for (float t : batch.inputs)
      if (!(t >= 0.0f) || t >= static_cast<float>(vocab_) || t != std::floor(t))
        throw ShapeError("tinydecoder: token id outside the vocabulary");
    for (auto y : batch.labels)
      if (y < 0 || static_cast<std::size_t>(y) >= vocab_) throw ShapeError("tinydecoder: label outside the vocabulary");
  }

  /// (B * context) x vocab logits, example-major.
  nn::Mat logits(std::span<const double> params, const Batch& batch) const {
    check_batch(batch);
    nn::Mat out(static_cast<Eigen::Index>(batch.size() * context_), static_cast<Eigen::Index>(vocab_));
    Trace tr;
    for (std::size_t i = 0; i < batch.size(); ++i)
      out.middleRows(static_cast<Eigen::Index>(i * context_), static_cast<Eigen::Index>(context_)) =
          forward(params, batch, i, tr);
    return out;
  }

  /// Hash of the MLP ReLU states (the only non-smooth operation).
  std::uint64_t kink_signature(std::span<const double> params, const Batch& batch) const {
    check_batch(batch);
    std::uint64_t h = nn::kSignatureSeed;
    Trace tr;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      forward(params, batch, i, tr);
      for (const auto& bt : tr.blocks) nn::hash_positive_pattern(bt.hidden, h);
    }
    return h;
  }

  double evaluate(std::span<const double> params, const Batch& batch, std::span<double> grad) const {
    check_batch(batch);
    const bool want_grad = !grad.empty();
    const double scale = 1.0 / static_cast<double>(batch.size() * context_);
    double total = 0.0;
    Trace tr;
    nn::Mat dlogits;
    for (std::size_t i = 0; i < batch.size(); ++i) {
      const nn::Mat out = forward(params, batch, i, tr);
      if (want_grad) dlogits.setZero(out.rows(), out.cols());
      for (std::size_t pos = 0; pos < context_; ++pos) {
        const int target = pos + 1 < context_ ? static_cast<int>(batch.input(i)[pos + 1]) : batch.labels[i];
        total += nn::softmax_xent(out.row(static_cast<Eigen::Index>(pos)).data(), vocab_, target,
                                  want_grad ? dlogits.row(static_cast<Eigen::Index>(pos)).data() : nullptr, scale);
      }
      if (want_grad) backward(params, tr, dlogits, grad);
    }
    return total * scale;
  }

 private:
  struct BlockIds {
    std::size_t ln1_g, ln1_b, qkv_w, qkv_b, proj_w, proj_b, ln2_g, ln2_b, fc_w, fc_b, out_w, out_b;
  };

  struct BlockTrace {
    nn::Mat x_in;
    nn::LayerNormCache ln1;
    nn::Mat h1, qkv;
    std::vector<nn::Mat> probs;  // per head, context x context
    nn::Mat attn;                // concatenated head outputs
    nn::Mat x_mid;
    nn::LayerNormCache ln2;
    nn::Mat h2, hidden;          // hidden is post-ReLU
  };

  struct Trace {
    std::vector<int> tokens;
    std::vector<BlockTrace> blocks;
    nn::LayerNormCache lnf;
    nn::Mat hf;
  };

  std::size_t add(const std::string& name, std::vector<std::size_t> shape, ParamRole role, std::size_t fan_in = 0) {
    layout_.add(name, std::move(shape), role, fan_in);
    return layout_.blocks().size() - 1;
  }

  const ParamBlock& blk(std::size_t i) const { return layout_.blocks()[i]; }

  nn::Mat forward(std::span<const double> params, const Batch& batch, std::size_t example, Trace& tr) const {
    const auto T = static_cast<Eigen::Index>(context_);
    const auto W = static_cast<Eigen::Index>(width_);
    const auto dh = W / static_cast<Eigen::Index>(heads_);
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));

    const auto in = batch.input(example);
    tr.tokens.assign(context_, 0);
    for (std::size_t j = 0; j < context_; ++j) tr.tokens[j] = static_cast<int>(in[j]);
    const auto tok = nn::view(params, blk(tok_));
    const auto pos = nn::view(params, blk(tok_ + 1));
    nn::Mat x(T, W);
    for (Eigen::Index j = 0; j < T; ++j) x.row(j) = tok.row(tr.tokens[static_cast<std::size_t>(j)]) + pos.row(j);

    tr.blocks.resize(blocks_.size());
    for (std::size_t b = 0; b < blocks_.size(); ++b) {
      const auto& id = blocks_[b];
      auto& bt = tr.blocks[b];
      bt.x_in = x;
      bt.h1 = nn::layer_norm(x, nn::view_vec(params, blk(id.ln1_g)), nn::view_vec(params, blk(id.ln1_b)), bt.ln1);
      bt.qkv = bt.h1 * nn::view(params, blk(id.qkv_w)).transpose();
      bt.qkv.rowwise() += nn::view_vec(params, blk(id.qkv_b)).transpose();
      bt.attn.resize(T, W);
      bt.probs.resize(heads_);
      for (Eigen::Index h = 0; h < static_cast<Eigen::Index>(heads_); ++h) {
        const auto q = bt.qkv.middleCols(h * dh, dh);
        const auto k = bt.qkv.middleCols(W + h * dh, dh);
        const auto v = bt.qkv.middleCols(2 * W + h * dh, dh);
        nn::Mat s = (q * k.transpose()) * att_scale;
        for (Eigen::Index r = 0; r < T; ++r) {
          double mx = -std::numeric_limits<double>::infinity();
          for (Eigen::Index c = 0; c <= r; ++c) mx = std::max(mx, s(r, c));
          double z = 0.0;
          for (Eigen::Index c = 0; c <= r; ++c) {
            s(r, c) = std::exp(s(r, c) - mx);
            z += s(r, c);
          }
          for (Eigen::Index c = 0; c < T; ++c) s(r, c) = c <= r ? s(r, c) / z : 0.0;
        }
        bt.attn.middleCols(h * dh, dh) = s * v;
        bt.probs[static_cast<std::size_t>(h)] = std::move(s);
      }
      nn::Mat o = bt.attn * nn::view(params, blk(id.proj_w)).transpose();
      o.rowwise() += nn::view_vec(params, blk(id.proj_b)).transpose();
      bt.x_mid = x + o;
      bt.h2 = nn::layer_norm(bt.x_mid, nn::view_vec(params, blk(id.ln2_g)), nn::view_vec(params, blk(id.ln2_b)), bt.ln2);
      bt.hidden = bt.h2 * nn::view(params, blk(id.fc_w)).transpose();
      bt.hidden.rowwise() += nn::view_vec(params, blk(id.fc_b)).transpose();
      nn::relu_inplace(bt.hidden);
      nn::Mat o2 = bt.hidden * nn::view(params, blk(id.out_w)).transpose();
      o2.rowwise() += nn::view_vec(params, blk(id.out_b)).transpose();
      x = bt.x_mid + o2;
    }
    tr.hf = nn::layer_norm(x, nn::view_vec(params, blk(lnf_g_)), nn::view_vec(params, blk(lnf_b_)), tr.lnf);
    nn::Mat logits = tr.hf * nn::view(params, blk(head_w_)).transpose();
    logits.rowwise() += nn::view_vec(params, blk(head_b_)).transpose();
    return logits;
  }

  void backward(std::span<const double> params, const Trace& tr, const nn::Mat& dlogits, std::span<double> grad) const {
    const auto T = static_cast<Eigen::Index>(context_);
    const auto W = static_cast<Eigen::Index>(width_);
    const auto dh = W / static_cast<Eigen::Index>(heads_);
    const double att_scale = 1.0 / std::sqrt(static_cast<double>(dh));

    nn::view(grad, blk(head_w_)).noalias() += dlogits.transpose() * tr.hf;
    nn::view_vec(grad, blk(head_b_)) += dlogits.colwise().sum().transpose();
    nn::Mat dhf = dlogits * nn::view(params, blk(head_w_));
    nn::Mat dx = nn::layer_norm_backward(dhf, nn::view_vec(params, blk(lnf_g_)), tr.lnf,
                                         nn::view_vec(grad, blk(lnf_g_)), nn::view_vec(grad, blk(lnf_b_)));

    for (std::size_t b = blocks_.size(); b-- > 0;) {
      const auto& id = blocks_[b];
      const auto& bt = tr.blocks[b];

      // MLP branch: x = x_mid + proj(relu(fc(ln2(x_mid)))).
      nn::view(grad, blk(id.out_w)).noalias() += dx.transpose() * bt.hidden;
      nn::view_vec(grad, blk(id.out_b)) += dx.colwise().sum().transpose();
      nn::Mat dhidden = dx * nn::view(params, blk(id.out_w));
      nn::relu_backward(dhidden, bt.hidden);
      nn::view(grad, blk(id.fc_w)).noalias() += dhidden.transpose() * bt.h2;
      nn::view_vec(grad, blk(id.fc_b)) += dhidden.colwise().sum().transpose();
      const nn::Mat dh2 = dhidden * nn::view(params, blk(id.fc_w));
      nn::Mat dmid = dx + nn::layer_norm_backward(dh2, nn::view_vec(params, blk(id.ln2_g)), bt.ln2,
                                                  nn::view_vec(grad, blk(id.ln2_g)), nn::view_vec(grad, blk(id.ln2_b)));

      // Attention branch: x_mid = x_in + proj(attn(ln1(x_in))).
      nn::view(grad, blk(id.proj_w)).noalias() += dmid.transpose() * bt.attn;
      nn::view_vec(grad, blk(id.proj_b)) += dmid.colwise().sum().transpose();
      const nn::Mat dattn = dmid * nn::view(params, blk(id.proj_w));
      nn::Mat dqkv(T, 3 * W);
      for (Eigen::Index h = 0; h < static_cast<Eigen::Index>(heads_); ++h) {
        const auto& p = bt.probs[static_cast<std::size_t>(h)];
        const auto q = bt.qkv.middleCols(h * dh, dh);
        const auto k = bt.qkv.middleCols(W + h * dh, dh);
        const auto v = bt.qkv.middleCols(2 * W + h * dh, dh);
        const auto dy = dattn.middleCols(h * dh, dh);
        dqkv.middleCols(2 * W + h * dh, dh) = p.transpose() * dy;
        const nn::Mat dp = dy * v.transpose();
        nn::Mat ds(T, T);
        for (Eigen::Index r = 0; r < T; ++r) {
          const double inner = dp.row(r).dot(p.row(r));
          ds.row(r) = p.row(r).array() * (dp.row(r).array() - inner);
        }
        ds *= att_scale;
        dqkv.middleCols(h * dh, dh) = ds * k;
        dqkv.middleCols(W + h * dh, dh) = ds.transpose() * q;
      }
      nn::view(grad, blk(id.qkv_w)).noalias() += dqkv.transpose() * bt.h1;
      nn::view_vec(grad, blk(id.qkv_b)) += dqkv.colwise().sum().transpose();
      const nn::Mat dh1 = dqkv * nn::view(params, blk(id.qkv_w));
      dx = dmid + nn::layer_norm_backward(dh1, nn::view_vec(params, blk(id.ln1_g)), bt.ln1,
                                          nn::view_vec(grad, blk(id.ln1_g)), nn::view_vec(grad, blk(id.ln1_b)));
    }

    auto dtok = nn::view(grad, blk(tok_));
    auto dpos = nn::view(grad, blk(tok_ + 1));
    for (Eigen::Index j = 0; j < T; ++j) {
      dtok.row(tr.tokens[static_cast<std::size_t>(j)]) += dx.row(j);
      dpos.row(j) += dx.row(j);
    }
  }

  std::size_t vocab_, context_, width_, heads_;
  Layout layout_;
  std::size_t tok_ = 0;
  std::vector<BlockIds> blocks_;
  std::size_t lnf_g_ = 0, lnf_b_ = 0, head_w_ = 0, head_b_ = 0;
};

}  // namespace wsdl
