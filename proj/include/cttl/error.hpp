// Copyright 2026 The cttlstm Authors. Apache 2.0 License.
#pragma once

#include <stdexcept>
#include <string>

namespace cttl {

// Base class for every error the library raises.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operand shapes do not satisfy an operation's precondition.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration value or inconsistent model wiring.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed or unsupported file content.
class FormatError : public Error {
 public:
  enum class Kind {
    kBadMagic,
    kBadType,
    kBadRank,
    kBadDims,
    kTruncated,
    kVersion,
    kCorruptEntry,
    kNameCollision,
    kConfigMismatch,
    kIo,
  };
  FormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

// A NaN or infinity appeared where training cannot continue.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace cttl
