// Copyright 2026 The cascade-oam Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CASCADE_ERRORS_HPP
#define CASCADE_ERRORS_HPP

#include <cstdint>
#include <stdexcept>
#include <string>

namespace cascade {

/// Invalid argument or violated precondition.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A numerical procedure failed to reach its requested accuracy.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, double achieved = 0.0)
      : std::runtime_error(what), achieved_(achieved) {}

  /// Achieved error estimate (or a suggested value, depending on the thrower).
  double achieved() const noexcept { return achieved_; }

 private:
  double achieved_;
};

/// Configuration could not be parsed or is inconsistent.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// File could not be opened, read or written.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Structurally invalid tag file or stream.
class FormatError : public std::runtime_error {
 public:
  enum class Kind { kTruncated, kCorrupt, kUnsupportedVersion, kValidation };

  FormatError(Kind kind, const std::string& what, std::uint64_t offset = 0)
      : std::runtime_error(what), kind_(kind), offset_(offset) {}

  Kind kind() const noexcept { return kind_; }
  /// Byte offset or record index the error refers to (see the thrower).
  std::uint64_t offset() const noexcept { return offset_; }

 private:
  Kind kind_;
  std::uint64_t offset_;
};

}  // namespace cascade

#endif  // CASCADE_ERRORS_HPP
