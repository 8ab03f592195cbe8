#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace wsdl {

/// Root of every exception the toolkit throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed run configuration (unknown key, bad value, inconsistent schedule).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Tensor or vector dimensions that do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Input data that is absent, malformed, or corrupt.
class DataError : public Error {
 public:
  enum class Kind { missing, format, corruption };

  DataError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// A NaN/Inf showed up in a loss, gradient, or curvature estimate.
class NumericError : public Error {
 public:
  NumericError(const std::string& what, std::uint64_t step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  explicit NumericError(const std::string& what) : Error(what) {}
  std::uint64_t step() const noexcept { return step_; }

 private:
  std::uint64_t step_ = 0;
};

class CheckpointError : public Error {
 public:
  enum class Kind { io, bad_magic, bad_version, truncated, digest_mismatch, crc_mismatch, format };

  CheckpointError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Raised when an analysis needs checkpoints that the run does not contain.
class MissingCheckpointError : public Error {
 public:
  MissingCheckpointError(const std::string& what, std::uint64_t step) : Error(what), step_(step) {}
  std::uint64_t step() const noexcept { return step_; }

 private:
  std::uint64_t step_;
};

}  // namespace wsdl
