#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qsub {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
  public:
    using Error::Error;
};

/// A matrix that was required to be Hermitian (or unitary) is not.
class StructureError : public Error {
  public:
    StructureError(const std::string &what, double residual)
        : Error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

  private:
    double residual_;
};

class ConvergenceError : public Error {
  public:
    ConvergenceError(const std::string &what, double residual)
        : Error(what), residual_(residual) {}
    double residual() const noexcept { return residual_; }

  private:
    double residual_;
};

class NonCommutingError : public Error {
  public:
    NonCommutingError(const std::string &what, double commutator_norm)
        : Error(what), commutator_norm_(commutator_norm) {}
    double commutator_norm() const noexcept { return commutator_norm_; }

  private:
    double commutator_norm_;
};

/// Precondition on a value (norm, ordering, range) was violated.
class DomainError : public Error {
  public:
    using Error::Error;
};

/// Metric singular or not positive-definite at some location.
class SingularMetricError : public Error {
  public:
    using Error::Error;
};

} // namespace qsub
