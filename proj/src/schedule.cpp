#include "sndiff/schedule.hpp"

#include <string>

namespace sndiff {

void check_time(double t, const char* what) {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw DomainError(std::string(what) + ": time " + std::to_string(t) + " outside [0, 1]");
  }
}

DiffusionSchedule::DiffusionSchedule(double sigma) : sigma_(sigma) {
  if (!(sigma > 1.0) || !std::isfinite(sigma)) {
    throw ConfigError("schedule sigma must be a finite value > 1, got " + std::to_string(sigma));
  }
  log_sigma_ = std::log(sigma);
}

double DiffusionSchedule::drift(double t) const {
  check_time(t, "drift");
  return 0.0;
}

double DiffusionSchedule::diffusion(double t) const {
  check_time(t, "diffusion");
  return std::exp(t * log_sigma_);
}

double DiffusionSchedule::alpha(double t) const {
  check_time(t, "alpha");
  return 1.0;
}

double DiffusionSchedule::beta_sq(double t) const {
  check_time(t, "beta");
  // expm1 keeps relative accuracy for small t.
  return std::expm1(2.0 * t * log_sigma_) / (2.0 * log_sigma_);
}

double DiffusionSchedule::beta(double t) const { return std::sqrt(beta_sq(t)); }

KernelParams DiffusionSchedule::kernel_params(double t) const {
  check_time(t, "kernel_params");
  return {alpha(t), beta(t)};
}

Vector DiffusionSchedule::perturb(const Vector& x0, double t, const Vector& z) const {
  require_same_size(x0, z, "perturb");
  const auto [a, b] = kernel_params(t);
  return a * x0 + b * z;
}

Vector DiffusionSchedule::prior_sample(Eigen::Index dim, Rng& rng) const {
  if (dim < 1) throw ShapeError("prior_sample: dimension must be >= 1");
  return prior_std() * standard_normal(dim, rng);
}

}  // namespace sndiff
