// Copyright (c) 2026, The soseleto authors
// SPDX-License-Identifier: Apache-2.0
//
// Error kinds raised by the library. Every public entry point reports
// contract violations by throwing one of these; nothing is signalled through
// sentinel return values.

#pragma once

#include <stdexcept>
#include <string>

namespace soseleto {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Vector or matrix dimensions do not agree with the architecture or with
/// each other.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A NaN or infinity appeared where only finite values are allowed.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration; always raised before any state is mutated.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input outside an operation's mathematical domain (empty dataset, empty
/// cohort, unsorted thresholds).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A text file was readable but its contents are malformed. `line()` is the
/// 1-based line number, or 0 when the problem is not tied to a single line.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A class label is outside [0, n_classes).
class LabelRangeError : public ParseError {
 public:
  using ParseError::ParseError;
};

}  // namespace soseleto
