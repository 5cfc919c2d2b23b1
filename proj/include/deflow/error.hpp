// Copyright (c) 2026 deflow-cpp contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace deflow {

// Bad user input: malformed files, inconsistent shapes, invalid config values.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite values showed up where finite math was required (NaN loss, NaN
// activations). Maps to a distinct process exit code in the CLI.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// Filesystem-level failure, always carries the offending path in the message.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Internal consistency failure (e.g. a gathered cell index outside the grid);
// indicates a bug in the calling code, not bad user input.
class InternalError : public std::logic_error {
 public:
  explicit InternalError(const std::string& what) : std::logic_error(what) {}
};

}  // namespace deflow
