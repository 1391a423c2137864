#pragma once

#include "sndiff/common.hpp"
#include "sndiff/random.hpp"

namespace sndiff {

struct KernelParams {
  double alpha;
  double beta;
};

/// Variance-exploding SDE  dx = g(t) dw  with g(t) = sigma^t on t in [0, 1].
///
/// The perturbation kernel is q(x_t | x_0) = N(alpha_t x_0, beta_t^2 I) with
/// alpha_t = 1 and beta_t^2 = (sigma^(2t) - 1) / (2 ln sigma), the integral of
/// g(s)^2 over [0, t]. Immutable once constructed.
class DiffusionSchedule {
 public:
  explicit DiffusionSchedule(double sigma = 25.0);

  double sigma() const { return sigma_; }

  double drift(double t) const;      // f(t), identically zero
  double diffusion(double t) const;  // g(t)
  double alpha(double t) const;
  double beta(double t) const;
  double beta_sq(double t) const;

  /// (alpha_t, beta_t); throws DomainError outside [0, 1].
  KernelParams kernel_params(double t) const;

  /// alpha_t x0 + beta_t z.
  Vector perturb(const Vector& x0, double t, const Vector& z) const;

  /// Draw from the base distribution N(0, beta(1)^2 I).
  Vector prior_sample(Eigen::Index dim, Rng& rng) const;

  double prior_std() const { return beta(1.0); }

 private:
  double sigma_;
  double log_sigma_;
};

void check_time(double t, const char* what);

}  // namespace sndiff
