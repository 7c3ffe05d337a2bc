// Copyright 2026 The rffedge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace rff {

// Root of every error the library throws. The kind lets callers (the CLI in
// particular) map failures to exit codes without string matching.
class Error : public std::runtime_error {
 public:
  enum class Kind : std::uint8_t {
    kDimension,
    kParameter,
    kInput,
    kDegenerateInput,
    kState,
    kFormat,
    kConfig,
    kIo,
  };

  Error(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

class DimensionError : public Error {
 public:
  explicit DimensionError(const std::string& what) : Error(Kind::kDimension, what) {}
};

class ParameterError : public Error {
 public:
  explicit ParameterError(const std::string& what) : Error(Kind::kParameter, what) {}
};

class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error(Kind::kInput, what) {}
};

class DegenerateInputError : public Error {
 public:
  explicit DegenerateInputError(const std::string& what)
      : Error(Kind::kDegenerateInput, what) {}
};

class StateError : public Error {
 public:
  explicit StateError(const std::string& what) : Error(Kind::kState, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(Kind::kConfig, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(Kind::kIo, what) {}
};

// Malformed file contents. Carries the byte offset at which decoding failed.
class FormatError : public Error {
 public:
  FormatError(const std::string& what, std::uint64_t offset)
      : Error(Kind::kFormat, what + " (at byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}

  std::uint64_t offset() const noexcept { return offset_; }

 private:
  std::uint64_t offset_;
};

}  // namespace rff
