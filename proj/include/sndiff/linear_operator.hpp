#pragma once

#include "sndiff/common.hpp"

#include <string>

namespace sndiff {

/// Forward map A : R^d -> R^m of a linear inverse problem y = A x + n.
class LinearOperator {
 public:
  enum class Kind { Identity, ScaledIdentity, Dense, RandomGaussian };

  static LinearOperator identity(Eigen::Index d);
  static LinearOperator scaled_identity(Eigen::Index d, double scale);
  static LinearOperator dense(Matrix matrix);
  /// Dense operator tagged as a random Gaussian measurement matrix.
  static LinearOperator random_gaussian(Matrix matrix);

  Kind kind() const { return kind_; }
  Eigen::Index rows() const { return rows_; }
  Eigen::Index cols() const { return cols_; }
  double scale() const { return scale_; }

  Vector apply(const Vector& x) const;
  Vector adjoint(const Vector& y) const;
  /// A A^T v.
  Vector gram_apply(const Vector& v) const;
  Matrix to_dense() const;

 private:
  LinearOperator(Kind kind, Eigen::Index rows, Eigen::Index cols, double scale, Matrix matrix);

  Kind kind_;
  Eigen::Index rows_;
  Eigen::Index cols_;
  double scale_;
  Matrix matrix_;
};

std::string kind_name(LinearOperator::Kind kind);

}  // namespace sndiff
