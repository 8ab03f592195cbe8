#pragma once

// Dense building blocks shared by the zoo. Everything here runs in double; the
// caller converts stored single-precision parameters once per evaluation.

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "wsdl/models/layout.hpp"

namespace wsdl::nn {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;
using RowVec = Eigen::RowVectorXd;
using ConstMatMap = Eigen::Map<const Mat>;
using MatMap = Eigen::Map<Mat>;
using ConstVecMap = Eigen::Map<const Vec>;
using VecMap = Eigen::Map<Vec>;

/// Block viewed as a row-major (shape[0] x rest) matrix.
inline ConstMatMap view(std::span<const double> params, const ParamBlock& b) {
  const auto rows = static_cast<Eigen::Index>(b.shape[0]);
  const auto cols = static_cast<Eigen::Index>(b.size() / b.shape[0]);
  return ConstMatMap(params.data() + b.offset, rows, cols);
}
inline MatMap view(std::span<double> params, const ParamBlock& b) {
  const auto rows = static_cast<Eigen::Index>(b.shape[0]);
  const auto cols = static_cast<Eigen::Index>(b.size() / b.shape[0]);
  return MatMap(params.data() + b.offset, rows, cols);
}
inline ConstVecMap view_vec(std::span<const double> params, const ParamBlock& b) {
  return ConstVecMap(params.data() + b.offset, static_cast<Eigen::Index>(b.size()));
}
inline VecMap view_vec(std::span<double> params, const ParamBlock& b) {
  return VecMap(params.data() + b.offset, static_cast<Eigen::Index>(b.size()));
}

/// -log softmax(logits)[label]. When `dlogits` is non-null, adds
/// scale * (softmax(logits) - onehot(label)) into it.
inline double softmax_xent(const double* logits, std::size_t classes, int label, double* dlogits, double scale) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < classes; ++c) mx = std::max(mx, logits[c]);
  double z = 0.0;
  for (std::size_t c = 0; c < classes; ++c) z += std::exp(logits[c] - mx);
  const double log_z = mx + std::log(z);
  if (dlogits) {
    for (std::size_t c = 0; c < classes; ++c) {
      const double p = std::exp(logits[c] - log_z);
      dlogits[c] += scale * (p - (static_cast<int>(c) == label ? 1.0 : 0.0));
    }
  }
  return log_z - logits[label];
}

/// ReLU in place; the derivative at exactly 0 is taken to be 0.
template <class Derived>
void relu_inplace(Eigen::MatrixBase<Derived>& z) {
  z = z.cwiseMax(0.0);
}

/// Zeroes gradient entries whose forward activation was not strictly positive.
template <class G, class A>
void relu_backward(Eigen::MatrixBase<G>& grad, const Eigen::MatrixBase<A>& activation) {
  grad = (activation.array() > 0.0).select(grad, 0.0);
}

/// 3x3, stride 1, zero-pad 1 patch matrix: (C*9) x (H*W).
inline void im2col3x3(const double* in, std::size_t channels, std::size_t h, std::size_t w, Mat& col) {
  col.resize(static_cast<Eigen::Index>(channels * 9), static_cast<Eigen::Index>(h * w));
  for (std::size_t c = 0; c < channels; ++c) {
    const double* plane = in + c * h * w;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        double* row = col.row(static_cast<Eigen::Index>(c * 9 + ky * 3 + kx)).data();
        for (std::size_t y = 0; y < h; ++y) {
          const long sy = static_cast<long>(y) + ky - 1;
          for (std::size_t x = 0; x < w; ++x) {
            const long sx = static_cast<long>(x) + kx - 1;
            row[y * w + x] = (sy < 0 || sy >= static_cast<long>(h) || sx < 0 || sx >= static_cast<long>(w))
                                 ? 0.0
                                 : plane[static_cast<std::size_t>(sy) * w + static_cast<std::size_t>(sx)];
          }
        }
      }
    }
  }
}

/// Adjoint of im2col3x3: scatters patch gradients back into `din` (accumulating).
inline void col2im3x3_add(const Mat& dcol, std::size_t channels, std::size_t h, std::size_t w, double* din) {
  for (std::size_t c = 0; c < channels; ++c) {
    double* plane = din + c * h * w;
    for (int ky = 0; ky < 3; ++ky) {
      for (int kx = 0; kx < 3; ++kx) {
        const double* row = dcol.row(static_cast<Eigen::Index>(c * 9 + ky * 3 + kx)).data();
        for (std::size_t y = 0; y < h; ++y) {
          const long sy = static_cast<long>(y) + ky - 1;
          if (sy < 0 || sy >= static_cast<long>(h)) continue;
          for (std::size_t x = 0; x < w; ++x) {
            const long sx = static_cast<long>(x) + kx - 1;
            if (sx < 0 || sx >= static_cast<long>(w)) continue;
            plane[static_cast<std::size_t>(sy) * w + static_cast<std::size_t>(sx)] += row[y * w + x];
          }
        }
      }
    }
  }
}

/// 2x2 stride-2 max pool over a (C x H*W) map. Ties go to the first element in
/// row-major window order.
inline void maxpool2(const Mat& in, std::size_t h, std::size_t w, Mat& out, std::vector<std::uint32_t>& argmax) {
  const std::size_t oh = h / 2, ow = w / 2;
  const auto channels = static_cast<std::size_t>(in.rows());
  out.resize(in.rows(), static_cast<Eigen::Index>(oh * ow));
  argmax.resize(channels * oh * ow);
  for (std::size_t c = 0; c < channels; ++c) {
    const double* src = in.row(static_cast<Eigen::Index>(c)).data();
    double* dst = out.row(static_cast<Eigen::Index>(c)).data();
    for (std::size_t y = 0; y < oh; ++y) {
      for (std::size_t x = 0; x < ow; ++x) {
        std::size_t best = (2 * y) * w + 2 * x;
        const std::size_t cand[3] = {best + 1, best + w, best + w + 1};
        for (std::size_t k : cand)
          if (src[k] > src[best]) best = k;
        dst[y * ow + x] = src[best];
        argmax[c * oh * ow + y * ow + x] = static_cast<std::uint32_t>(best);
      }
    }
  }
}

inline void maxpool2_backward(const Mat& dout, const std::vector<std::uint32_t>& argmax, std::size_t h,
                              std::size_t w, Mat& din) {
  const std::size_t pooled = (h / 2) * (w / 2);
  din.setZero(dout.rows(), static_cast<Eigen::Index>(h * w));
  for (Eigen::Index c = 0; c < dout.rows(); ++c)
    for (std::size_t k = 0; k < pooled; ++k)
      din(c, argmax[static_cast<std::size_t>(c) * pooled + k]) += dout(c, static_cast<Eigen::Index>(k));
}

/// Folds the sign pattern of `m` (entry > 0) into an FNV-1a style hash.
template <class Derived>
void hash_positive_pattern(const Eigen::MatrixBase<Derived>& m, std::uint64_t& h) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      h ^= m(r, c) > 0.0 ? 0x9Eu : 0x37u;
      h *= 0x100000001B3ULL;
    }
}

inline void hash_indices(const std::vector<std::uint32_t>& idx, std::uint64_t& h) {
  for (auto i : idx) {
    h ^= i;
    h *= 0x100000001B3ULL;
  }
}

inline constexpr std::uint64_t kSignatureSeed = 0xCBF29CE484222325ULL;

inline constexpr double kLayerNormEps = 1e-5;

/// Row-wise layer norm. Keeps the normalized rows and inverse std for backward.
struct LayerNormCache {
  Mat xhat;
  Vec inv_std;
};

inline Mat layer_norm(const Mat& x, const ConstVecMap& gain, const ConstVecMap& bias, LayerNormCache& cache) {
  const auto n = x.cols();
  cache.xhat.resize(x.rows(), n);
  cache.inv_std.resize(x.rows());
  Mat y(x.rows(), n);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const double mean = x.row(r).sum() / static_cast<double>(n);
    const RowVec centered = x.row(r).array() - mean;
    const double var = centered.squaredNorm() / static_cast<double>(n);
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    cache.inv_std(r) = inv;
    cache.xhat.row(r) = centered * inv;
    y.row(r) = cache.xhat.row(r).cwiseProduct(gain.transpose()) + bias.transpose();
  }
  return y;
}

/// Returns dL/dx; accumulates dL/dgain and dL/dbias.
inline Mat layer_norm_backward(const Mat& dy, const ConstVecMap& gain, const LayerNormCache& cache, VecMap dgain,
                               VecMap dbias) {
  const auto n = static_cast<double>(dy.cols());
  Mat dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    dgain += dy.row(r).cwiseProduct(cache.xhat.row(r)).transpose();
    dbias += dy.row(r).transpose();
    const RowVec dxhat = dy.row(r).cwiseProduct(gain.transpose());
    const double mean_d = dxhat.sum() / n;
    const double mean_dx = dxhat.dot(cache.xhat.row(r)) / n;
    dx.row(r) = cache.inv_std(r) * (dxhat.array() - mean_d - cache.xhat.row(r).array() * mean_dx);
  }
  return dx;
}

}  // namespace wsdl::nn
