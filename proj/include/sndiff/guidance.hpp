#pragma once

#include "sndiff/linear_operator.hpp"
#include "sndiff/random.hpp"
#include "sndiff/schedule.hpp"
#include "sndiff/score.hpp"

#include <string>
#include <utility>

namespace sndiff {

enum class Rule { PiGDM, DPS, Projection };

Rule parse_rule(const std::string& name);
std::string rule_name(Rule rule);

/// Form of the ΠGDM variance r_t^2 as a function of beta_t^2.
enum class RsqForm {
  Positive,  // beta^2 / (beta^2 + 1)
  Literal,   // beta^2 / (beta^2 - 1)
  Constant,  // r_sq_value at every t
};

/// How Tweedie Jacobians are formed: exact vjp, or the identity
/// approximation d x_{0|t} / d x_t ~ I / alpha_t.
enum class JacobianMode { Exact, Identity };

/// Projection rule: fresh z per step, or one z per chain.
enum class ProjectionNoise { Fresh, Frozen };

struct GuidanceParams {
  Rule rule = Rule::PiGDM;
  double lambda_prime = 1.0;
  double kappa_prime = 1.0;
  double rho = 1.0;
  RsqForm r_sq_form = RsqForm::Positive;
  double r_sq_value = 1.0;
  double residual_floor = 1e-8;
  JacobianMode jacobian = JacobianMode::Exact;
  ProjectionNoise projection_noise = ProjectionNoise::Fresh;
  double time_floor = kDefaultTimeFloor;

  void validate() const;
  double r_sq(double t, const DiffusionSchedule& schedule) const;
  double q_sq(double t, const DiffusionSchedule& schedule) const { return r_sq(t, schedule); }
};

struct LikelihoodScorePair {
  Vector grad_x;
  Vector grad_n;
  double residual_norm = 0.0;
};

/// x_{0|t} = (x_t + beta_t^2 s(x_t, t)) / alpha_t.
Vector tweedie_denoise(const ScoreFunction& score, const Vector& x_t, double t,
                       const DiffusionSchedule& schedule, double time_floor = kDefaultTimeFloor);

/// v^T d x_{0|t} / d x_t = (v + beta_t^2 vjp(x_t, t, v)) / alpha_t.
Vector tweedie_vjp(const ScoreFunction& score, const Vector& x_t, double t,
                   const DiffusionSchedule& schedule, const Vector& v,
                   JacobianMode mode = JacobianMode::Exact, double time_floor = kDefaultTimeFloor);

struct SigmaSolve {
  Vector w;
  int iterations = 0;
  bool dense_fallback = false;
};

/// Solves (r2 A A^T + q2 I) w = b. Conjugate gradients on the matrix-free
/// operator (relative tolerance 1e-10, at most 10 m iterations) with a dense
/// Cholesky fallback for m <= 256. Throws NumericError when the system is
/// singular or not positive definite.
SigmaSolve solve_sigma(const LinearOperator& A, double r2, double q2, const Vector& b);

LikelihoodScorePair pigdm_scores(const LinearOperator& A, const Vector& y, const Vector& x_t,
                                 const Vector& n_t, double t, const ScoreFunction& s_x,
                                 const ScoreFunction& s_n, const GuidanceParams& params,
                                 const DiffusionSchedule& schedule);

LikelihoodScorePair dps_scores(const LinearOperator& A, const Vector& y, const Vector& x_t,
                               const Vector& n_t, double t, const ScoreFunction& s_x,
                               const ScoreFunction& s_n, const GuidanceParams& params,
                               const DiffusionSchedule& schedule);

/// y_hat_t = alpha_t y + beta_t A z, with z given (signal-space standard normal).
Vector corrupt_observation(const LinearOperator& A, const Vector& y, double t, const Vector& z,
                           const DiffusionSchedule& schedule);

LikelihoodScorePair projection_scores(const LinearOperator& A, const Vector& y, const Vector& x_t,
                                      const Vector& n_t, double t, const DiffusionSchedule& schedule,
                                      const GuidanceParams& params, const Vector& z);
LikelihoodScorePair projection_scores(const LinearOperator& A, const Vector& y, const Vector& x_t,
                                      const Vector& n_t, double t, const DiffusionSchedule& schedule,
                                      const GuidanceParams& params, Rng& rng);

/// Step multipliers (w_x, w_n) of the data-consistency update.
std::pair<double, double> consistency_weights(const GuidanceParams& params, double t,
                                              const DiffusionSchedule& schedule,
                                              double residual_norm);

}  // namespace sndiff
