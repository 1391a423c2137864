#include "sndiff/oracle.hpp"

#include <algorithm>
#include <limits>

namespace sndiff {

namespace {

Matrix spd_inverse(const Matrix& m, const char* what) {
  if (m.rows() != m.cols()) throw ShapeError(std::string(what) + ": covariance must be square");
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) throw NumericError(std::string(what) + ": covariance is not positive definite");
  Matrix inv = llt.solve(Matrix::Identity(m.rows(), m.cols()));
  if (!inv.allFinite()) throw NumericError(std::string(what) + ": covariance is singular");
  return inv;
}

}  // namespace

GaussianPosterior gaussian_posterior(const LinearOperator& A, const Vector& y,
                                     const GaussianPrior& prior_x, const GaussianPrior& prior_n) {
  const Eigen::Index d = A.cols(), m = A.rows();
  if (y.size() != m || prior_n.mean.size() != m || prior_n.covariance.rows() != m)
    throw ShapeError("gaussian posterior: measurement-space dimensions disagree");
  if (prior_x.mean.size() != d || prior_x.covariance.rows() != d)
    throw ShapeError("gaussian posterior: signal-space dimensions disagree");
  const Matrix a = A.to_dense();
  const Matrix px = spd_inverse(prior_x.covariance, "gaussian posterior (signal)");
  const Matrix pn = spd_inverse(prior_n.covariance, "gaussian posterior (noise)");
  Matrix precision = a.transpose() * pn * a + px;
  precision = 0.5 * (precision + precision.transpose());
  GaussianPosterior post;
  post.covariance = spd_inverse(precision, "gaussian posterior");
  post.covariance = 0.5 * (post.covariance + post.covariance.transpose());
  post.mean = post.covariance * (a.transpose() * pn * (y - prior_n.mean) + px * prior_x.mean);
  return post;
}

Vector GridPosterior::mean() const {
  Vector m = Vector::Zero(nodes.front().size());
  for (std::size_t k = 0; k < nodes.size(); ++k) m += probs[k] * nodes[k];
  return m;
}

Eigen::Index GridPosterior::argmax() const {
  return static_cast<Eigen::Index>(std::max_element(probs.begin(), probs.end()) - probs.begin());
}

GridPosterior grid_posterior(const LinearOperator& A, const Vector& y, const LogDensity& log_prior_x,
                             const LogDensity& log_prior_n, const GridSpec& grid) {
  const Eigen::Index d = A.cols();
  if (d < 1 || d > 2) throw DomainError("grid posterior: signal dimension must be 1 or 2");
  if (grid.lower.size() != d || grid.upper.size() != d || static_cast<Eigen::Index>(grid.points.size()) != d)
    throw ShapeError("grid posterior: grid spec does not match the signal dimension");
  if (y.size() != A.rows()) throw ShapeError("grid posterior: y does not match the rows of A");
  for (Eigen::Index k = 0; k < d; ++k) {
    if (grid.points[k] < 1) throw ConfigError("grid posterior: need at least one point per axis");
    if (!(grid.upper[k] >= grid.lower[k])) throw ConfigError("grid posterior: upper < lower");
  }
  auto coord = [&](Eigen::Index axis, int i) {
    const int n = grid.points[axis];
    if (n == 1) return 0.5 * (grid.lower[axis] + grid.upper[axis]);
    return grid.lower[axis] + (grid.upper[axis] - grid.lower[axis]) * i / (n - 1);
  };
  GridPosterior out;
  std::vector<double> logp;
  const int n0 = grid.points[0];
  const int n1 = d == 2 ? grid.points[1] : 1;
  for (int j = 0; j < n1; ++j) {
    for (int i = 0; i < n0; ++i) {
      Vector x(d);
      x[0] = coord(0, i);
      if (d == 2) x[1] = coord(1, j);
      logp.push_back(log_prior_x(x) + log_prior_n(y - A.apply(x)));
      out.nodes.push_back(std::move(x));
    }
  }
  double top = -std::numeric_limits<double>::infinity();
  for (double v : logp) {
    if (std::isnan(v)) throw NumericError("grid posterior: NaN log density");
    top = std::max(top, v);
  }
  if (!std::isfinite(top)) throw NumericError("grid posterior: all grid cells have zero mass");
  double total = 0.0;
  for (double v : logp) total += std::exp(v - top);
  out.probs.reserve(logp.size());
  for (double v : logp) out.probs.push_back(std::exp(v - top) / total);
  return out;
}

MapResult map_estimate(const LinearOperator& A, const Vector& y, const LogDensity& log_prior_x,
                       const LogDensityGradient& grad_log_prior_x, const LogDensity& log_prior_n,
                       const LogDensityGradient& grad_log_prior_n, const Vector& init, int steps,
                       double lr) {
  if (init.size() != A.cols()) throw ShapeError("map estimate: init does not match the columns of A");
  if (steps < 0) throw ConfigError("map estimate: steps must be >= 0");
  if (!(lr > 0.0)) throw ConfigError("map estimate: lr must be > 0");
  auto objective = [&](const Vector& x) { return log_prior_n(y - A.apply(x)) + log_prior_x(x); };
  MapResult out;
  out.x = init;
  out.objective = objective(out.x);
  out.trace.push_back(out.objective);
  for (int k = 0; k < steps; ++k) {
    const Vector g = grad_log_prior_x(out.x) - A.adjoint(grad_log_prior_n(y - A.apply(out.x)));
    out.x += lr * g;
    out.objective = objective(out.x);
    out.trace.push_back(out.objective);
    if (!out.x.allFinite() || !std::isfinite(out.objective)) {
      throw MapDivergence("map estimate: diverged at step " + std::to_string(k), std::move(out.trace));
    }
  }
  return out;
}

}  // namespace sndiff
