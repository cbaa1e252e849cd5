// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace qmimo {

/// Bad or inconsistent user-supplied configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// A mathematical invariant that should hold by construction was violated
/// (CLI exit code 3). Indicates a bug or numerical breakdown, not bad input.
class InternalConsistencyError : public std::runtime_error {
 public:
  explicit InternalConsistencyError(const std::string& what)
      : std::runtime_error(what) {}
};

/// A Hermitian solve failed even after the one-shot jitter fallback.
class SingularMatrixError : public InternalConsistencyError {
 public:
  explicit SingularMatrixError(const std::string& what)
      : InternalConsistencyError(what) {}
};

/// Derivative of the arcsin law requested at a unit-magnitude correlation.
class SingularDerivativeError : public InternalConsistencyError {
 public:
  explicit SingularDerivativeError(const std::string& what)
      : InternalConsistencyError(what) {}
};

}  // namespace qmimo
