#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "wsdl/core/error.hpp"
#include "wsdl/core/rng.hpp"
#include "wsdl/data/dataset.hpp"

namespace wsdl {

/// Stream id for the permutation of epoch `epoch`.
inline std::uint64_t epoch_stream(std::uint64_t epoch) noexcept {
  return detail::splitmix64(fnv1a64("epoch") + epoch);
}

/// Fisher-Yates permutation of [0, n) determined by (seed, epoch).
inline std::vector<std::size_t> epoch_permutation(std::size_t n, std::uint64_t seed, std::uint64_t epoch) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed, epoch_stream(epoch));
  for (std::size_t i = n; i > 1; --i) std::swap(perm[i - 1], perm[rng.below(i)]);
  return perm;
}

inline std::size_t batches_per_epoch(std::size_t n, std::size_t batch_size) {
  return (n + batch_size - 1) / batch_size;
}

/// Index lists for one epoch; the last batch keeps the remainder.
inline std::vector<std::vector<std::size_t>> epoch_batches(std::size_t n, std::size_t batch_size,
                                                           std::uint64_t epoch, std::uint64_t seed) {
  if (batch_size < 1) throw ShapeError("epoch_batches: batch size must be >= 1");
  if (batch_size > n)
    throw ShapeError("epoch_batches: batch size " + std::to_string(batch_size) + " exceeds dataset size " +
                     std::to_string(n));
  const auto perm = epoch_permutation(n, seed, epoch);
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t start = 0; start < n; start += batch_size) {
    const std::size_t stop = std::min(n, start + batch_size);
    out.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(start), perm.begin() + static_cast<std::ptrdiff_t>(stop));
  }
  return out;
}

inline std::vector<Batch> epoch_batches(const Dataset& data, std::size_t batch_size, std::uint64_t epoch,
                                        std::uint64_t seed) {
  std::vector<Batch> out;
  for (const auto& idx : epoch_batches(data.size(), batch_size, epoch, seed)) out.push_back(gather(data, idx));
  return out;
}

/// Fixed seeded subset used for every evaluation loss and diagnostic of a run:
/// `size` distinct indices in ascending order (the whole dataset if smaller).
inline std::vector<std::size_t> probe_indices(std::size_t n, std::size_t size, std::uint64_t seed) {
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  if (size >= n) return perm;
  Rng rng(seed, "probe");
  for (std::size_t i = 0; i < size; ++i) std::swap(perm[i], perm[i + rng.below(n - i)]);
  perm.resize(size);
  std::sort(perm.begin(), perm.end());
  return perm;
}

inline Batch probe_batch(const Dataset& data, std::size_t size, std::uint64_t seed) {
  return gather(data, probe_indices(data.size(), size, seed));
}

}  // namespace wsdl
