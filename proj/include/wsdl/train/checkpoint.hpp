#pragma once

// Checkpoint file, little-endian throughout:
//
//   offset  type      field
//        0  char[4]   magic "WSDL"
//        4  u32       format version (1)
//        8  u64       model spec digest
//       16  u64       d (parameter count)
//       24  u64       step t
//       32  u32       schedule kind (0 wsd, 1 warmup-cosine)
//       36  u32       reserved (0)
//       40  u64 x3    warmup, decay_start, total
//       64  f64       peak learning rate
//       72  f64 x4    beta1, beta2, eps, weight decay
//      104  u64       optimizer step count
//      112  u32       rng algorithm id
//      116  u32       reserved (0)
//      120  u64 x3    rng seed, stream, counter
//      144  u64       loss-log offset (rows logged before step t)
//      152  f32[d]    parameters, then f32[d] first moment, f32[d] second moment
//   152+12d u32       CRC-32 (zlib polynomial) of every preceding byte

#include <zlib.h>

#include <bit>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <optional>
#include <string>
#include <vector>

#include "wsdl/core/error.hpp"
#include "wsdl/core/param_vector.hpp"
#include "wsdl/core/rng.hpp"
#include "wsdl/optim/adamw.hpp"
#include "wsdl/optim/schedule.hpp"

namespace wsdl {

inline constexpr char kCheckpointMagic[4] = {'W', 'S', 'D', 'L'};
inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::size_t kCheckpointHeaderBytes = 152;

struct Checkpoint {
  std::uint64_t model_digest = 0;
  std::uint64_t step = 0;
  ScheduleSpec schedule;
  ParamVector params;
  AdamWState optimizer;
  RngState rng;
  std::uint64_t loss_log_offset = 0;

  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

namespace detail {

class ByteWriter {
 public:
  void u32(std::uint32_t x) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(x >> (8 * i)));
  }
  void u64(std::uint64_t x) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(x >> (8 * i)));
  }
  void f64(double x) { u64(std::bit_cast<std::uint64_t>(x)); }
  void f32s(const ParamVector& v) {
    for (float x : v) u32(std::bit_cast<std::uint32_t>(x));
  }
  void raw(const char* p, std::size_t n) { bytes_.insert(bytes_.end(), p, p + n); }
  std::vector<std::uint8_t>& bytes() { return bytes_; }

 private:
  std::vector<std::uint8_t> bytes_;
};

class ByteReader {
 public:
  ByteReader(const std::vector<std::uint8_t>& b, std::size_t pos = 0) : b_(b), pos_(pos) {}
  std::uint32_t u32() {
    std::uint32_t x = 0;
    for (int i = 0; i < 4; ++i) x |= static_cast<std::uint32_t>(b_[pos_++]) << (8 * i);
    return x;
  }
  std::uint64_t u64() {
    std::uint64_t x = 0;
    for (int i = 0; i < 8; ++i) x |= static_cast<std::uint64_t>(b_[pos_++]) << (8 * i);
    return x;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  ParamVector f32s(std::size_t n) {
    ParamVector v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = std::bit_cast<float>(u32());
    return v;
  }

 private:
  const std::vector<std::uint8_t>& b_;
  std::size_t pos_;
};

inline std::uint32_t crc32_of(const std::uint8_t* data, std::size_t n) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    crc = ::crc32(crc, data, chunk);
    data += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace detail

inline std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& c) {
  const std::size_t d = c.params.size();
  if (c.optimizer.m.size() != d || c.optimizer.v.size() != d)
    throw CheckpointError(CheckpointError::Kind::format, "checkpoint: moment lengths differ from parameter length");
  detail::ByteWriter w;
  w.raw(kCheckpointMagic, 4);
  w.u32(kCheckpointVersion);
  w.u64(c.model_digest);
  w.u64(d);
  w.u64(c.step);
  w.u32(c.schedule.kind == ScheduleKind::wsd ? 0u : 1u);
  w.u32(0);
  w.u64(c.schedule.warmup);
  w.u64(c.schedule.decay_start);
  w.u64(c.schedule.total);
  w.f64(c.schedule.peak_lr);
  w.f64(c.optimizer.hyper.beta1);
  w.f64(c.optimizer.hyper.beta2);
  w.f64(c.optimizer.hyper.eps);
  w.f64(c.optimizer.hyper.weight_decay);
  w.u64(c.optimizer.t);
  w.u32(RngState::kAlgorithm);
  w.u32(0);
  w.u64(c.rng.seed);
  w.u64(c.rng.stream);
  w.u64(c.rng.counter);
  w.u64(c.loss_log_offset);
  w.f32s(c.params);
  w.f32s(c.optimizer.m);
  w.f32s(c.optimizer.v);
  const std::uint32_t crc = detail::crc32_of(w.bytes().data(), w.bytes().size());
  w.u32(crc);
  return std::move(w.bytes());
}

/// Decodes a checkpoint image. When `expected_digest` is given, a different model
/// digest is rejected before the payload is examined.
inline Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes,
                                    std::optional<std::uint64_t> expected_digest = std::nullopt) {
  using K = CheckpointError::Kind;
  if (bytes.size() < 8) throw CheckpointError(K::truncated, "checkpoint truncated: " + std::to_string(bytes.size()) + " bytes");
  if (!std::equal(kCheckpointMagic, kCheckpointMagic + 4, bytes.begin()))
    throw CheckpointError(K::bad_magic, "not a checkpoint (bad magic)");
  detail::ByteReader r(bytes, 4);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion)
    throw CheckpointError(K::bad_version, "unsupported checkpoint version " + std::to_string(version));
  if (bytes.size() < kCheckpointHeaderBytes) throw CheckpointError(K::truncated, "checkpoint truncated inside header");

  Checkpoint c;
  c.model_digest = r.u64();
  if (expected_digest && c.model_digest != *expected_digest)
    throw CheckpointError(K::digest_mismatch, "checkpoint was written for a different model");
  const std::uint64_t d = r.u64();
  if (d > (bytes.size() / 12) + 1) throw CheckpointError(K::truncated, "checkpoint truncated: payload shorter than d");
  const std::size_t expected_size = kCheckpointHeaderBytes + 12 * d + 4;
  if (bytes.size() < expected_size) throw CheckpointError(K::truncated, "checkpoint truncated: payload shorter than d");
  if (bytes.size() > expected_size) throw CheckpointError(K::format, "checkpoint has trailing bytes");
  const std::uint32_t stored_crc = detail::ByteReader(bytes, expected_size - 4).u32();
  if (detail::crc32_of(bytes.data(), expected_size - 4) != stored_crc)
    throw CheckpointError(K::crc_mismatch, "checkpoint CRC mismatch");

  c.step = r.u64();
  const std::uint32_t kind = r.u32();
  if (kind > 1) throw CheckpointError(K::format, "unknown schedule kind in checkpoint");
  c.schedule.kind = kind == 0 ? ScheduleKind::wsd : ScheduleKind::warmup_cosine;
  r.u32();
  c.schedule.warmup = r.u64();
  c.schedule.decay_start = r.u64();
  c.schedule.total = r.u64();
  c.schedule.peak_lr = r.f64();
  c.optimizer.hyper.beta1 = r.f64();
  c.optimizer.hyper.beta2 = r.f64();
  c.optimizer.hyper.eps = r.f64();
  c.optimizer.hyper.weight_decay = r.f64();
  c.optimizer.t = r.u64();
  if (r.u32() != RngState::kAlgorithm) throw CheckpointError(K::format, "unknown rng algorithm in checkpoint");
  r.u32();
  c.rng.seed = r.u64();
  c.rng.stream = r.u64();
  c.rng.counter = r.u64();
  c.loss_log_offset = r.u64();
  c.params = r.f32s(d);
  c.optimizer.m = r.f32s(d);
  c.optimizer.v = r.f32s(d);
  return c;
}

/// Writes to a temporary name and renames, so a visible checkpoint is always complete.
inline void save_checkpoint(const Checkpoint& c, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(c);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError(CheckpointError::Kind::io, "cannot write " + tmp.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError(CheckpointError::Kind::io, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline Checkpoint load_checkpoint(const std::filesystem::path& path,
                                  std::optional<std::uint64_t> expected_digest = std::nullopt) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointError::Kind::io, "cannot open " + path.string());
  const std::vector<std::uint8_t> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return decode_checkpoint(bytes, expected_digest);
}

/// ckpt_00001234.bin
inline std::string checkpoint_filename(std::uint64_t step) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "ckpt_%08llu.bin", static_cast<unsigned long long>(step));
  return buf;
}

}  // namespace wsdl
