#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "wsdl/core/error.hpp"
#include "wsdl/core/rng.hpp"
#include "wsdl/data/dataset.hpp"

namespace wsdl {

struct BlobsSpec {
  int classes = 10;
  std::size_t per_class = 500;
  std::size_t dim = 32;
  double separation = 3.0;
  std::uint64_t seed = 0;
};

/// Class means with pairwise distance >= separation. While classes fit in the
/// dimension they sit on scaled, randomly signed coordinate axes (pairwise distance
/// exactly separation); beyond that, Gaussian proposals are rejection-sampled.
inline std::vector<std::vector<double>> blob_means(const BlobsSpec& spec) {
  Rng rng(spec.seed, "blobs/means");
  const double r = spec.separation / std::sqrt(2.0);
  std::vector<std::vector<double>> means;
  for (int c = 0; c < spec.classes; ++c) {
    std::vector<double> mu(spec.dim, 0.0);
    if (static_cast<std::size_t>(c) < spec.dim) {
      mu[c] = rng.uniform() < 0.5 ? -r : r;
    } else {
      const double scale = spec.separation * 2.0 / std::sqrt(static_cast<double>(spec.dim));
      for (int attempt = 0;; ++attempt) {
        if (attempt > 100000) throw DataError(DataError::Kind::format, "blob_means: cannot place class means");
        for (auto& x : mu) x = scale * rng.normal();
        bool ok = true;
        for (const auto& other : means) {
          double d2 = 0.0;
          for (std::size_t j = 0; j < spec.dim; ++j) d2 += (mu[j] - other[j]) * (mu[j] - other[j]);
          if (d2 < spec.separation * spec.separation) {
            ok = false;
            break;
          }
        }
        if (ok) break;
      }
    }
    means.push_back(std::move(mu));
  }
  return means;
}

/// Unit-variance Gaussian clusters around blob_means(spec), class-major order.
/// `split` selects an independent sample stream over the same means (0 = train,
/// 1 = held-out).
inline Dataset synthetic_blobs(const BlobsSpec& spec, std::uint64_t split = 0) {
  if (spec.classes < 2) throw DataError(DataError::Kind::format, "synthetic_blobs: need at least 2 classes");
  if (spec.per_class < 1) throw DataError(DataError::Kind::format, "synthetic_blobs: per_class must be >= 1");
  if (spec.dim < 1) throw DataError(DataError::Kind::format, "synthetic_blobs: dim must be >= 1");
  if (!(spec.separation > 0.0)) throw DataError(DataError::Kind::format, "synthetic_blobs: separation must be > 0");

  const auto means = blob_means(spec);
  Rng rng(spec.seed, fnv1a64("blobs/samples") + split);
  Dataset d;
  d.feature_shape = {spec.dim};
  d.num_classes = spec.classes;
  d.provenance = Provenance::synthetic;
  d.inputs.reserve(spec.classes * spec.per_class * spec.dim);
  for (int c = 0; c < spec.classes; ++c) {
    for (std::size_t i = 0; i < spec.per_class; ++i) {
      for (std::size_t j = 0; j < spec.dim; ++j) d.inputs.push_back(static_cast<float>(means[c][j] + rng.normal()));
      d.labels.push_back(c);
    }
  }
  return d;
}

}  // namespace wsdl
