// Copyright 2026 The CoordTok Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace coordtok {

/// Base class of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor extents that do not fit an operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A value outside an operation's domain (non-finite coordinate, bad count...).
class InputError : public Error {
 public:
  using Error::Error;
};

/// Invalid model, training or run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Non-finite loss or gradient during optimization.
class DivergenceError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failure (open, write, rename).
class IoError : public Error {
 public:
  using Error::Error;
};

/// Malformed binary container. `kind()` distinguishes the failure.
class FormatError : public Error {
 public:
  enum class Kind {
    kBadMagic,
    kVersionMismatch,
    kTruncated,
    kCorrupt,
    kUnknownTensor,
    kMissingTensor,
    kShapeMismatch,
  };

  FormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

}  // namespace coordtok
