#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace twobit {

// Base for every error raised by the library. Callers that only care about
// "something went wrong" can catch this; the subclasses map onto the error
// categories used throughout the modules.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// A value handed to an encoder or mapper that cannot be represented (NaN, inf).
class InputError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class DegenerateInputError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class ProtocolError : public Error {
 public:
  using Error::Error;
};

class ResourceError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed bytes. Carries the byte offset at which decoding gave up when
// one is meaningful.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& what, std::optional<std::size_t> offset = std::nullopt)
      : Error(offset ? what + " (at byte offset " + std::to_string(*offset) + ")" : what),
        offset_(offset) {}

  std::optional<std::size_t> offset() const noexcept { return offset_; }

 private:
  std::optional<std::size_t> offset_;
};

}  // namespace twobit
