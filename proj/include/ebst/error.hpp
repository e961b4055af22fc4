// Copyright 2026 The ebst Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace ebst {

/// Invalid dimensions, options or experiment settings.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file. `line()` is 1-based; 0 when not tied to a line.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(line == 0 ? what : "line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// A non-finite value showed up during forward/backward. `layer()` is the
/// offending layer index, or -1 when the failure is outside the network.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, int layer)
      : std::runtime_error(what + " (layer " + std::to_string(layer) + ")"), layer_(layer) {}
  int layer() const noexcept { return layer_; }

 private:
  int layer_;
};

/// Caller broke a documented precondition.
class ContractViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace ebst
