#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace wsdl {

/// Serializable position of an Rng stream.
struct RngState {
  static constexpr std::uint32_t kAlgorithm = 1;  // counter-based splitmix64

  std::uint64_t seed = 0;
  std::uint64_t stream = 0;
  std::uint64_t counter = 0;

  friend bool operator==(const RngState&, const RngState&) = default;
};

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace detail

/// FNV-1a; used to turn tags like "sharpness" into stream ids.
constexpr std::uint64_t fnv1a64(std::string_view text) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : text) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

// Counter-based generator: draw n of stream (seed, stream) is a pure function of
// (seed, stream, n). The whole state is three integers, so checkpoints can carry it
// and any draw can be reproduced without replaying the prefix.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0) noexcept
      : state_{seed, stream, 0}, key_(make_key(seed, stream)) {}
  Rng(std::uint64_t seed, std::string_view tag) noexcept : Rng(seed, fnv1a64(tag)) {}

  static Rng restore(const RngState& s) noexcept {
    Rng r(s.seed, s.stream);
    r.state_.counter = s.counter;
    return r;
  }

  const RngState& state() const noexcept { return state_; }

  std::uint64_t next_u64() noexcept {
    return detail::splitmix64(key_ ^ detail::splitmix64(state_.counter++));
  }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }

  /// Unbiased integer in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept {
    const std::uint64_t limit = (~std::uint64_t{0}) - (~std::uint64_t{0}) % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  // Box-Muller without caching the second variate, so the state stays three integers.
  double normal() noexcept {
    double u1;
    do {
      u1 = uniform();
    } while (u1 <= 0.0);
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  static std::uint64_t make_key(std::uint64_t seed, std::uint64_t stream) noexcept {
    return detail::splitmix64(seed ^ detail::splitmix64(stream ^ 0xD1B54A32D192ED03ULL));
  }

  RngState state_;
  std::uint64_t key_;
};

/// Fresh stream for `seed`; identical seeds give identical sequences.
inline Rng seeded_stream(std::uint64_t seed) noexcept { return Rng(seed); }

}  // namespace wsdl
