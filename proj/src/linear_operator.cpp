#include "sndiff/linear_operator.hpp"

namespace sndiff {

LinearOperator::LinearOperator(Kind kind, Eigen::Index rows, Eigen::Index cols, double scale,
                               Matrix matrix)
    : kind_(kind), rows_(rows), cols_(cols), scale_(scale), matrix_(std::move(matrix)) {
  if (rows_ < 1 || cols_ < 1) throw ShapeError("linear operator: empty dimensions");
  if (!std::isfinite(scale_)) throw ConfigError("linear operator: non-finite scale");
  if (!matrix_.allFinite()) throw ConfigError("linear operator: non-finite matrix entries");
}

LinearOperator LinearOperator::identity(Eigen::Index d) {
  return LinearOperator(Kind::Identity, d, d, 1.0, Matrix());
}

LinearOperator LinearOperator::scaled_identity(Eigen::Index d, double scale) {
  return LinearOperator(Kind::ScaledIdentity, d, d, scale, Matrix());
}

LinearOperator LinearOperator::dense(Matrix matrix) {
  const auto r = matrix.rows(), c = matrix.cols();
  return LinearOperator(Kind::Dense, r, c, 1.0, std::move(matrix));
}

LinearOperator LinearOperator::random_gaussian(Matrix matrix) {
  const auto r = matrix.rows(), c = matrix.cols();
  return LinearOperator(Kind::RandomGaussian, r, c, 1.0, std::move(matrix));
}

Vector LinearOperator::apply(const Vector& x) const {
  if (x.size() != cols_) throw ShapeError("A x: expected " + std::to_string(cols_) + " entries");
  switch (kind_) {
    case Kind::Identity: return x;
    case Kind::ScaledIdentity: return scale_ * x;
    default: return matrix_ * x;
  }
}

Vector LinearOperator::adjoint(const Vector& y) const {
  if (y.size() != rows_) throw ShapeError("A^T y: expected " + std::to_string(rows_) + " entries");
  switch (kind_) {
    case Kind::Identity: return y;
    case Kind::ScaledIdentity: return scale_ * y;
    default: return matrix_.transpose() * y;
  }
}

Vector LinearOperator::gram_apply(const Vector& v) const {
  if (v.size() != rows_) throw ShapeError("A A^T v: expected " + std::to_string(rows_) + " entries");
  switch (kind_) {
    case Kind::Identity: return v;
    case Kind::ScaledIdentity: return (scale_ * scale_) * v;
    default: return matrix_ * (matrix_.transpose() * v);
  }
}

Matrix LinearOperator::to_dense() const {
  switch (kind_) {
    case Kind::Identity: return Matrix::Identity(rows_, cols_);
    case Kind::ScaledIdentity: return scale_ * Matrix::Identity(rows_, cols_);
    default: return matrix_;
  }
}

std::string kind_name(LinearOperator::Kind kind) {
  switch (kind) {
    case LinearOperator::Kind::Identity: return "identity";
    case LinearOperator::Kind::ScaledIdentity: return "scaled-identity";
    case LinearOperator::Kind::Dense: return "dense";
    case LinearOperator::Kind::RandomGaussian: return "random-gaussian";
  }
  return "unknown";
}

}  // namespace sndiff
