#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace lidar_forge {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or truncated input file. `offset` is a byte offset for binary
/// formats and a 1-based line number for text formats.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(what), offset_(offset) {}
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class DegeneratePointError : public Error {
 public:
  using Error::Error;
};

}  // namespace lidar_forge
