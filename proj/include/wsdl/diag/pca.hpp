#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wsdl/core/error.hpp"
#include "wsdl/core/param_vector.hpp"
#include "wsdl/core/vector_ops.hpp"

namespace wsdl {

inline constexpr std::size_t kMaxPcaDenominator = 10;

struct PcaResult {
  std::vector<std::vector<double>> components;  // unit length, mutually orthogonal
  std::vector<double> eigenvalues;              // of the returned components, descending
  std::vector<double> ratios;                   // eigenvalue / sum of the first n_pc eigenvalues
  std::vector<double> spectrum;                 // all m−1 nonnegative Gram eigenvalues, descending
  std::size_t n_pc = 0;
  double total_variance = 0.0;                  // mean squared distance to the centroid
};

namespace detail {

// Eigenvalues within this relative gap are treated as one eigenspace.
inline constexpr double kPcaTieTolerance = 1e-9;

// Rotates an orthonormal basis of a degenerate eigenspace (columns of Q) into a
// solver-independent one: repeatedly take the normalized projection of the
// coordinate axis with the largest remaining projection, lowest index first.
inline Eigen::MatrixXd canonical_basis(const Eigen::MatrixXd& q) {
  const Eigen::Index d = q.rows(), c = q.cols();
  Eigen::MatrixXd rows = q;  // row j = coordinates of P e_j in the basis q
  Eigen::MatrixXd out(d, c);
  for (Eigen::Index k = 0; k < c; ++k) {
    Eigen::Index best = 0;
    double best_norm = -1.0;
    for (Eigen::Index j = 0; j < d; ++j) {
      const double n = rows.row(j).squaredNorm();
      if (n > best_norm * (1.0 + 1e-12)) {
        best_norm = n;
        best = j;
      }
    }
    const Eigen::VectorXd b = rows.row(best).transpose() / std::sqrt(best_norm);
    out.col(k) = q * b;
    rows -= (rows * b) * b.transpose();
  }
  return out;
}

inline void fix_sign(std::vector<double>& v) {
  std::size_t arg = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (std::abs(v[i]) > std::abs(v[arg])) arg = i;
  if (v[arg] < 0.0)
    for (auto& e : v) e = -e;
}

}  // namespace detail

/// PCA of a point cloud through the m×m Gram matrix of centered points. Returns
/// up to k components; fewer when the cloud spans fewer dimensions. Each
/// component's entry of largest magnitude is positive.
inline PcaResult trajectory_pca(const std::vector<std::vector<double>>& points, std::size_t k) {
  const std::size_t m = points.size();
  if (m < 2) throw ConfigError("trajectory_pca: need at least 2 points, got " + std::to_string(m));
  if (k < 1 || k > m - 1) throw ConfigError("trajectory_pca: k must be in [1, m-1]");
  const std::size_t d = points[0].size();
  for (const auto& p : points) detail::require_same_length(d, p.size(), "trajectory_pca");

  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  RowMat x(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < m; ++i)
    x.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(points[i].data(), static_cast<Eigen::Index>(d));
  const Eigen::RowVectorXd mean = x.colwise().mean();
  x.rowwise() -= mean;

  PcaResult r;
  r.total_variance = x.squaredNorm() / static_cast<double>(m);
  if (!(r.total_variance > 0.0)) throw NumericError("trajectory_pca: degenerate cloud (all points identical)");

  const Eigen::MatrixXd g = (x * x.transpose()) / static_cast<double>(m);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
  if (es.info() != Eigen::Success) throw NumericError("trajectory_pca: eigendecomposition failed");
  // Ascending from Eigen; centering removes one dimension, so keep the top m−1.
  std::vector<double> lam(m - 1);
  Eigen::MatrixXd u(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(m - 1));
  for (std::size_t i = 0; i + 1 < m; ++i) {
    const auto src = static_cast<Eigen::Index>(m - 1 - i);
    lam[i] = std::max(0.0, es.eigenvalues()(src));
    u.col(static_cast<Eigen::Index>(i)) = es.eigenvectors().col(src);
  }
  r.spectrum = lam;

  const double top = lam[0];
  std::size_t rank = 0;
  while (rank < lam.size() && lam[rank] > 1e-12 * top) ++rank;
  const std::size_t keep = std::min(k, rank);

  // Lift Gram eigenvectors: Xᵀu is a covariance eigenvector with the same eigenvalue.
  // Lift every component of the last eigenspace that `keep` touches, so ties can be canonicalised.
  std::size_t lift = keep;
  while (lift < rank && lam[lift] >= lam[keep - 1] * (1.0 - detail::kPcaTieTolerance)) ++lift;
  Eigen::MatrixXd comps = x.transpose() * u.leftCols(static_cast<Eigen::Index>(lift));
  for (Eigen::Index c = 0; c < comps.cols(); ++c) comps.col(c).normalize();

  for (std::size_t start = 0; start < lift;) {
    std::size_t end = start + 1;
    while (end < lift && lam[end] >= lam[start] * (1.0 - detail::kPcaTieTolerance)) ++end;
    if (end - start > 1) {
      const auto s = static_cast<Eigen::Index>(start), n = static_cast<Eigen::Index>(end - start);
      comps.middleCols(s, n) = detail::canonical_basis(comps.middleCols(s, n));
    }
    start = end;
  }

  r.n_pc = std::min(m - 1, kMaxPcaDenominator);
  double denom = 0.0;
  for (std::size_t i = 0; i < r.n_pc; ++i) denom += lam[i];
  for (std::size_t i = 0; i < keep; ++i) {
    std::vector<double> v(comps.col(static_cast<Eigen::Index>(i)).data(), comps.col(static_cast<Eigen::Index>(i)).data() + d);
    detail::fix_sign(v);
    r.components.push_back(std::move(v));
    r.eigenvalues.push_back(lam[i]);
    r.ratios.push_back(lam[i] / denom);
  }
  return r;
}

inline PcaResult trajectory_pca(const std::vector<ParamVector>& points, std::size_t k) {
  std::vector<std::vector<double>> p;
  p.reserve(points.size());
  for (const auto& x : points) p.push_back(x.to_double());
  return trajectory_pca(p, k);
}

struct StepWindow {
  std::string name;
  std::uint64_t first = 0;
  std::uint64_t last = 0;
};

/// Last 20% of the stable phase, [T_c − 0.2(T_c − T_w), T_c].
inline StepWindow stable_tail_window(std::uint64_t warmup, std::uint64_t decay_start) {
  const auto len = static_cast<std::uint64_t>(std::llround(0.2 * static_cast<double>(decay_start - warmup)));
  return {"stable", decay_start - len, decay_start};
}

/// First 20% of the cooldown, [T_c, T_c + 0.2(T_end − T_c)].
inline StepWindow decay_head_window(std::uint64_t decay_start, std::uint64_t total) {
  const auto len = static_cast<std::uint64_t>(std::llround(0.2 * static_cast<double>(total - decay_start)));
  return {"decay", decay_start, decay_start + len};
}

/// Indices into `steps` that fall inside the window.
inline std::vector<std::size_t> select_window(const std::vector<std::uint64_t>& steps, const StepWindow& w) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < steps.size(); ++i)
    if (steps[i] >= w.first && steps[i] <= w.last) idx.push_back(i);
  return idx;
}

struct PhaseDirections {
  std::vector<double> v_s;
  std::vector<double> v_d;
};

inline std::vector<double> first_component(const std::vector<std::vector<double>>& cloud, const StepWindow& w) {
  if (cloud.size() < 2)
    throw MissingCheckpointError(w.name + " window [" + std::to_string(w.first) + ", " + std::to_string(w.last) + "] has " +
                                     std::to_string(cloud.size()) + " checkpoint(s); need at least 2",
                                 w.first);
  return trajectory_pca(cloud, 1).components.at(0);
}

/// First principal components of the stable-tail and decay-head checkpoint clouds.
inline PhaseDirections phase_directions(const std::vector<std::vector<double>>& stable_cloud, const StepWindow& stable_window,
                                        const std::vector<std::vector<double>>& decay_cloud, const StepWindow& decay_window) {
  return {first_component(stable_cloud, stable_window), first_component(decay_cloud, decay_window)};
}

}  // namespace wsdl
