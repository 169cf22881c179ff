#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace leo {

/// Base class for every failure raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Matrix or sequence dimensions do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation (empty list, zero matrix, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// An iterative numerical routine failed to converge.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class RankDeficient : public Error {
 public:
  using Error::Error;
};

class SingularMatrix : public Error {
 public:
  using Error::Error;
};

/// (A, C) is not observable, so no gain can place the poles of A - LC.
class PolePlacementInfeasible : public Error {
 public:
  using Error::Error;
};

/// Random generation exhausted its resample budget.
class GenerationError : public Error {
 public:
  using Error::Error;
};

/// Every reference component in the evaluation window was numerically zero.
class DegenerateReference : public Error {
 public:
  using Error::Error;
};

/// An observer rollout produced a non-finite value.
class DivergedRollout : public Error {
 public:
  DivergedRollout(std::size_t index, const std::string& what)
      : Error(what + " (first non-finite index " + std::to_string(index) + ")"), index_(index) {}

  /// Time index of the first non-finite state, or the epoch when raised by training.
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

}  // namespace leo
