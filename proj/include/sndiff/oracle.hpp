#pragma once

#include "sndiff/linear_operator.hpp"
#include "sndiff/problems.hpp"

#include <functional>
#include <string>
#include <vector>

namespace sndiff {

struct GaussianPosterior {
  Vector mean;
  Matrix covariance;
};

struct GaussianPrior {
  Vector mean;
  Matrix covariance;
};

/// Posterior over x for y = A x + n with x ~ N(mu_x, Sigma_x) and
/// n ~ N(mu_n, Sigma_n). Throws NumericError for singular covariances.
GaussianPosterior gaussian_posterior(const LinearOperator& A, const Vector& y,
                                     const GaussianPrior& prior_x, const GaussianPrior& prior_n);

using LogDensity = std::function<double(const Vector&)>;
using LogDensityGradient = std::function<Vector(const Vector&)>;

/// Regular grid over a box in one or two dimensions; `points[k]` cells per
/// axis, cell centres spanning [lower, upper].
struct GridSpec {
  Vector lower;
  Vector upper;
  std::vector<int> points;
};

struct GridPosterior {
  std::vector<Vector> nodes;   // cell centres, first axis fastest
  std::vector<double> probs;   // sums to 1
  Vector mean() const;
  Eigen::Index argmax() const;
};

/// p(x | y) proportional to p_X(x) p_N(y - A x), normalised by log-sum-exp.
GridPosterior grid_posterior(const LinearOperator& A, const Vector& y, const LogDensity& log_prior_x,
                             const LogDensity& log_prior_n, const GridSpec& grid);

struct MapResult {
  Vector x;
  double objective = 0.0;
  std::vector<double> trace;
};

class MapDivergence : public NumericError {
 public:
  MapDivergence(const std::string& what, std::vector<double> trace)
      : NumericError(what), trace_(std::move(trace)) {}
  const std::vector<double>& trace() const { return trace_; }

 private:
  std::vector<double> trace_;
};

/// Gradient ascent on log p_N(y - A x) + log p_X(x). Divergence (non-finite
/// iterate or objective) raises MapDivergence carrying the trace so far.
MapResult map_estimate(const LinearOperator& A, const Vector& y, const LogDensity& log_prior_x,
                       const LogDensityGradient& grad_log_prior_x, const LogDensity& log_prior_n,
                       const LogDensityGradient& grad_log_prior_n, const Vector& init, int steps,
                       double lr);

}  // namespace sndiff
