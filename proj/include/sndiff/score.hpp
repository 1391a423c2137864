#pragma once

#include "sndiff/common.hpp"
#include "sndiff/random.hpp"
#include "sndiff/schedule.hpp"

#include <memory>
#include <vector>

namespace sndiff {

/// A time-dependent score s(x, t) ~ grad_x log p_t(x) together with its
/// exact vector-Jacobian product v^T (d s / d x).
///
/// Implementations are immutable during inference and may be shared across
/// threads.
class ScoreFunction {
 public:
  virtual ~ScoreFunction() = default;

  virtual Eigen::Index dim() const = 0;
  virtual Vector score(const Vector& x, double t) const = 0;
  virtual Vector vjp(const Vector& x, double t, const Vector& v) const = 0;
};

using ScorePtr = std::shared_ptr<const ScoreFunction>;

/// Smallest time at which checked evaluations are performed; t below this
/// is clamped so that beta_t stays away from zero.
inline constexpr double kDefaultTimeFloor = 1e-3;

/// Checked evaluation: validates dimensions and finiteness and clamps t to
/// [time_floor, 1]. Throws DomainError for t outside [0, 1].
Vector score_at(const ScoreFunction& model, const Vector& x, double t,
                double time_floor = kDefaultTimeFloor);
Vector vjp_at(const ScoreFunction& model, const Vector& x, double t, const Vector& v,
              double time_floor = kDefaultTimeFloor);

/// Score of N(alpha_t mean, alpha_t^2 Sigma + beta_t^2 I), the Gaussian prior
/// N(mean, Sigma) pushed through the forward SDE. Sigma may be singular (a
/// zero covariance is a point mass), in which case the score only exists for
/// beta_t > 0.
class AnalyticGaussianScore final : public ScoreFunction {
 public:
  AnalyticGaussianScore(Vector mean, const Matrix& covariance, DiffusionSchedule schedule);
  /// Diagonal covariance.
  AnalyticGaussianScore(Vector mean, const Vector& variances, DiffusionSchedule schedule);

  /// Sample mean and covariance (plus `floor` on the diagonal).
  static AnalyticGaussianScore fit(const std::vector<Vector>& samples, double floor,
                                   DiffusionSchedule schedule);

  Eigen::Index dim() const override { return mean_.size(); }
  Vector score(const Vector& x, double t) const override;
  Vector vjp(const Vector& x, double t, const Vector& v) const override;

  /// Applies -(alpha^2 Sigma + beta^2 I)^{-1} to v.
  Vector apply_neg_precision(const Vector& v, double t) const;
  double log_density(const Vector& x, double t) const;
  Vector sample(Rng& rng) const;

  const Vector& mean() const { return mean_; }
  Matrix covariance() const;
  bool diagonal() const { return diagonal_; }

 private:
  Vector mean_;
  bool diagonal_;
  Vector eigenvalues_;  // variances when diagonal_
  Matrix eigenvectors_;
  DiffusionSchedule schedule_;
};

/// Mixture of diagonal Gaussians, each convolved with the SDE kernel.
class GaussianMixtureScore final : public ScoreFunction {
 public:
  GaussianMixtureScore(Vector weights, std::vector<Vector> means, std::vector<Vector> variances,
                       DiffusionSchedule schedule);

  Eigen::Index dim() const override { return means_.front().size(); }
  Vector score(const Vector& x, double t) const override;
  Vector vjp(const Vector& x, double t, const Vector& v) const override;

  double log_density(const Vector& x, double t) const;
  Vector sample(Rng& rng) const;

  const Vector& weights() const { return weights_; }
  const std::vector<Vector>& means() const { return means_; }
  const std::vector<Vector>& variances() const { return variances_; }

 private:
  struct Parts {
    Vector responsibilities;
    std::vector<Vector> component_scores;
    std::vector<Vector> total_variances;
    double log_density;
  };
  Parts parts(const Vector& x, double t) const;

  Vector weights_;
  std::vector<Vector> means_;
  std::vector<Vector> variances_;
  DiffusionSchedule schedule_;
};

}  // namespace sndiff
