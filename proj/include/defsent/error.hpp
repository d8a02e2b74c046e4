// Copyright 2026 The DefSent Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace defsent {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible tensor shapes or configuration dimensions.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Index (target id, token id, vocabulary id) outside its valid range.
class IndexError : public Error {
 public:
  using Error::Error;
};

// NaN or Inf produced or consumed by a numeric operation.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Invalid argument or precondition violation.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Too little data for the requested operation (e.g. splitting, folds).
class InsufficientData : public Error {
 public:
  using Error::Error;
};

// Malformed input file. Carries the 1-based line number when known (0 otherwise).
class ParseError : public Error {
 public:
  ParseError(const std::string& path, std::size_t line, const std::string& what)
      : Error(path + (line > 0 ? ":" + std::to_string(line) : std::string()) +
              ": " + what),
        line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// File could not be opened or read.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace defsent
