#pragma once

// CIFAR-10 "binary version": each record is one label byte followed by 3072
// pixel bytes (1024 R, 1024 G, 1024 B, each plane row-major 32x32).

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "wsdl/core/error.hpp"
#include "wsdl/data/dataset.hpp"

namespace wsdl {

inline constexpr std::size_t kCifarPixels = 3 * 32 * 32;
inline constexpr std::size_t kCifarRecord = 1 + kCifarPixels;

enum class Split { train, test };

/// Pixel byte -> stored value: scale to [0, 1], then shift by -0.5.
inline float cifar_pixel_value(std::uint8_t byte) noexcept {
  return static_cast<float>(static_cast<double>(byte) / 255.0 - 0.5);
}

/// Decodes an in-memory batch file image and appends its records to `out`.
inline void decode_cifar10_records(const std::vector<std::uint8_t>& bytes, const std::string& origin, Dataset& out) {
  if (bytes.empty() || bytes.size() % kCifarRecord != 0)
    throw DataError(DataError::Kind::format, origin + ": size " + std::to_string(bytes.size()) +
                                                 " is not a positive multiple of " + std::to_string(kCifarRecord));
  const std::size_t records = bytes.size() / kCifarRecord;
  out.inputs.reserve(out.inputs.size() + records * kCifarPixels);
  out.labels.reserve(out.labels.size() + records);
  for (std::size_t r = 0; r < records; ++r) {
    const std::uint8_t* rec = bytes.data() + r * kCifarRecord;
    if (rec[0] >= 10)
      throw DataError(DataError::Kind::corruption,
                      origin + ": record " + std::to_string(r) + " has label byte " + std::to_string(rec[0]));
    out.labels.push_back(rec[0]);
    for (std::size_t p = 0; p < kCifarPixels; ++p) out.inputs.push_back(cifar_pixel_value(rec[1 + p]));
  }
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(DataError::Kind::missing, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline Dataset empty_cifar10() {
  Dataset d;
  d.feature_shape = {3, 32, 32};
  d.num_classes = 10;
  d.provenance = Provenance::cifar10;
  return d;
}

/// Reads a single batch file (any number of records).
inline Dataset read_cifar10_batch(const std::filesystem::path& file) {
  Dataset d = empty_cifar10();
  decode_cifar10_records(read_file_bytes(file), file.string(), d);
  return d;
}

/// Loads data_batch_1..5.bin (train) or test_batch.bin (test) from `directory`
/// or from its cifar-10-batches-bin/ subdirectory. `limit` > 0 keeps only the
/// first `limit` examples.
inline Dataset load_cifar10(const std::filesystem::path& directory, Split split, std::size_t limit = 0) {
  std::filesystem::path dir = directory;
  if (!std::filesystem::exists(dir / "test_batch.bin") && std::filesystem::exists(dir / "cifar-10-batches-bin"))
    dir /= "cifar-10-batches-bin";

  std::vector<std::string> files;
  if (split == Split::train) {
    for (int i = 1; i <= 5; ++i) files.push_back("data_batch_" + std::to_string(i) + ".bin");
  } else {
    files.push_back("test_batch.bin");
  }

  Dataset d = empty_cifar10();
  for (const auto& name : files) {
    if (limit > 0 && d.size() >= limit) break;
    const auto path = dir / name;
    if (!std::filesystem::exists(path))
      throw DataError(DataError::Kind::missing, "CIFAR-10 file not found: " + path.string());
    decode_cifar10_records(read_file_bytes(path), path.string(), d);
  }
  if (limit > 0 && d.size() > limit) {
    d.labels.resize(limit);
    d.inputs.resize(limit * kCifarPixels);
  }
  d.validate();
  return d;
}

}  // namespace wsdl
