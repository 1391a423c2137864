#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>

namespace sndiff {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Base class for every error raised by the library. The CLI maps
/// subclasses onto exit codes (config/data -> 2, numeric -> 3).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation (t < 0, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Dimension mismatch between vectors/operators.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values, singular systems, divergence.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or parameters.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Unreadable or malformed input data.
class DataError : public Error {
 public:
  using Error::Error;
};

inline bool all_finite(const Vector& v) { return v.allFinite(); }

inline void require_same_size(const Vector& a, const Vector& b, const char* what) {
  if (a.size() != b.size()) {
    throw ShapeError(std::string(what) + ": size mismatch (" + std::to_string(a.size()) +
                     " vs " + std::to_string(b.size()) + ")");
  }
}

/// Runs fn(i) for i in [0, count) on up to `threads` workers (0 = hardware
/// concurrency). Each index is visited exactly once; the first exception
/// thrown by any worker is rethrown on the calling thread.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)>& fn);

}  // namespace sndiff
