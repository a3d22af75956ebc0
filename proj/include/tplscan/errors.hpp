// Copyright 2026 The tplscan Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef TPLSCAN_ERRORS_HPP
#define TPLSCAN_ERRORS_HPP

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>

namespace tplscan {

// Base class of every error the library raises. The CLI maps each subclass
// to a distinct exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input syntax. `line` is 1-based; 0 when unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Well-formed input that breaks a data invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Dimension mismatch between embeddings, or between an embedding table and
// the repository.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Bad thresholds or a mismatch between pipeline configurations.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Persisted container problems: wrong magic, wrong version, bad checksum.
class FormatError : public Error {
 public:
  using Error::Error;
};

class VersionError : public FormatError {
 public:
  using FormatError::FormatError;
};

class ChecksumError : public FormatError {
 public:
  using FormatError::FormatError;
};

// Receives non-fatal diagnostics. The default sink is a no-op.
using WarningSink = std::function<void(const std::string&)>;

}  // namespace tplscan

#endif  // TPLSCAN_ERRORS_HPP
