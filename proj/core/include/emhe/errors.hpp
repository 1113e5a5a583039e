#pragma once

#include <stdexcept>
#include <string>

namespace emhe {

/// Caller violated a precondition (dimension mismatch, empty window, ...).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical input the algorithm cannot start from (e.g. non-finite residual).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A constructive certificate/gain derivation has no feasible solution.
class DerivationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace emhe
