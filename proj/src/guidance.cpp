#include "sndiff/guidance.hpp"

#include <algorithm>

namespace sndiff {

Rule parse_rule(const std::string& name) {
  if (name == "pigdm") return Rule::PiGDM;
  if (name == "dps") return Rule::DPS;
  if (name == "projection") return Rule::Projection;
  throw ConfigError("unknown guidance rule '" + name + "' (expected pigdm, dps or projection)");
}

std::string rule_name(Rule rule) {
  switch (rule) {
    case Rule::PiGDM: return "pigdm";
    case Rule::DPS: return "dps";
    case Rule::Projection: return "projection";
  }
  return "unknown";
}

void GuidanceParams::validate() const {
  if (!(lambda_prime >= 0.0) || !std::isfinite(lambda_prime))
    throw ConfigError("guidance: lambda_prime must be finite and >= 0");
  if (!(kappa_prime >= 0.0) || !std::isfinite(kappa_prime))
    throw ConfigError("guidance: kappa_prime must be finite and >= 0");
  if (!(rho > 0.0) || !std::isfinite(rho)) throw ConfigError("guidance: rho must be > 0");
  if (!(residual_floor > 0.0)) throw ConfigError("guidance: residual_floor must be > 0");
  if (r_sq_form == RsqForm::Constant && !(r_sq_value >= 0.0 && std::isfinite(r_sq_value)))
    throw ConfigError("guidance: r_sq_value must be finite and >= 0");
  if (!(time_floor > 0.0 && time_floor < 1.0)) throw ConfigError("guidance: time_floor must be in (0, 1)");
}

double GuidanceParams::r_sq(double t, const DiffusionSchedule& schedule) const {
  if (r_sq_form == RsqForm::Constant) return r_sq_value;
  const double b2 = schedule.beta_sq(t);
  return r_sq_form == RsqForm::Positive ? b2 / (b2 + 1.0) : b2 / (b2 - 1.0);
}

namespace {

double effective_time(double t, double floor) {
  check_time(t, "guidance");
  return std::max(t, floor);
}

void check_dims(const LinearOperator& A, const Vector& y, const Vector& x_t, const Vector& n_t) {
  if (y.size() != A.rows()) throw ShapeError("guidance: y does not match the rows of A");
  if (x_t.size() != A.cols()) throw ShapeError("guidance: x_t does not match the columns of A");
  if (n_t.size() != A.rows()) throw ShapeError("guidance: n_t does not match the rows of A");
}

Vector checked(Vector v, const char* what) {
  if (!v.allFinite()) throw NumericError(std::string(what) + ": non-finite result");
  return v;
}

}  // namespace

Vector tweedie_denoise(const ScoreFunction& score, const Vector& x_t, double t,
                       const DiffusionSchedule& schedule, double time_floor) {
  const double te = effective_time(t, time_floor);
  const auto [alpha, beta] = schedule.kernel_params(te);
  const Vector s = score_at(score, x_t, te, time_floor);
  return checked((x_t + beta * beta * s) / alpha, "tweedie");
}

Vector tweedie_vjp(const ScoreFunction& score, const Vector& x_t, double t,
                   const DiffusionSchedule& schedule, const Vector& v, JacobianMode mode,
                   double time_floor) {
  const double te = effective_time(t, time_floor);
  require_same_size(x_t, v, "tweedie vjp");
  const auto [alpha, beta] = schedule.kernel_params(te);
  if (mode == JacobianMode::Identity) return v / alpha;
  const Vector j = vjp_at(score, x_t, te, v, time_floor);
  return checked((v + beta * beta * j) / alpha, "tweedie vjp");
}

SigmaSolve solve_sigma(const LinearOperator& A, double r2, double q2, const Vector& b) {
  if (b.size() != A.rows()) throw ShapeError("sigma solve: rhs does not match the rows of A");
  if (!std::isfinite(r2) || !std::isfinite(q2)) throw NumericError("sigma solve: non-finite variances");
  if (std::abs(r2) < 1e-300 && std::abs(q2) < 1e-300) throw NumericError("sigma solve: singular system (r^2 = q^2 = 0)");
  SigmaSolve out;
  const Eigen::Index m = A.rows();

  if (A.kind() == LinearOperator::Kind::Identity || A.kind() == LinearOperator::Kind::ScaledIdentity) {
    const double diag = r2 * A.scale() * A.scale() + q2;
    if (!(diag > 0.0)) throw NumericError("sigma solve: system is not positive definite");
    out.w = b / diag;
    return out;
  }

  auto op = [&](const Vector& v) -> Vector { return r2 * A.gram_apply(v) + q2 * v; };
  const double bnorm = b.norm();
  out.w = Vector::Zero(m);
  if (bnorm == 0.0) return out;
  Vector r = b;
  Vector p = r;
  double rr = r.squaredNorm();
  const double tol = 1e-10 * bnorm;
  const int max_iter = static_cast<int>(10 * m);
  bool converged = false;
  for (int k = 0; k < max_iter; ++k) {
    const Vector Ap = op(p);
    const double pAp = p.dot(Ap);
    if (!(pAp > 0.0) || !std::isfinite(pAp)) break;
    const double a = rr / pAp;
    out.w += a * p;
    r -= a * Ap;
    out.iterations = k + 1;
    const double rr_new = r.squaredNorm();
    if (std::sqrt(rr_new) <= tol) {
      converged = true;
      break;
    }
    p = r + (rr_new / rr) * p;
    rr = rr_new;
  }
  if (converged) return out;
  if (m > 256) throw NumericError("sigma solve: conjugate gradients did not converge");
  const Matrix dense = A.to_dense();
  Matrix sigma = r2 * dense * dense.transpose();
  sigma.diagonal().array() += q2;
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success) throw NumericError("sigma solve: system is not positive definite");
  out.w = llt.solve(b);
  out.dense_fallback = true;
  return out;
}

LikelihoodScorePair pigdm_scores(const LinearOperator& A, const Vector& y, const Vector& x_t,
                                 const Vector& n_t, double t, const ScoreFunction& s_x,
                                 const ScoreFunction& s_n, const GuidanceParams& params,
                                 const DiffusionSchedule& schedule) {
  check_dims(A, y, x_t, n_t);
  const double te = effective_time(t, params.time_floor);
  const Vector x0 = tweedie_denoise(s_x, x_t, te, schedule, params.time_floor);
  const Vector n0 = tweedie_denoise(s_n, n_t, te, schedule, params.time_floor);
  const Vector residual = y - A.apply(x0) - n0;
  const Vector w = solve_sigma(A, params.r_sq(te, schedule), params.q_sq(te, schedule), residual).w;
  LikelihoodScorePair out;
  out.grad_x = tweedie_vjp(s_x, x_t, te, schedule, A.adjoint(w), params.jacobian, params.time_floor);
  out.grad_n = tweedie_vjp(s_n, n_t, te, schedule, w, params.jacobian, params.time_floor);
  out.residual_norm = residual.norm();
  return out;
}

LikelihoodScorePair dps_scores(const LinearOperator& A, const Vector& y, const Vector& x_t,
                               const Vector& n_t, double t, const ScoreFunction& s_x,
                               const ScoreFunction& s_n, const GuidanceParams& params,
                               const DiffusionSchedule& schedule) {
  check_dims(A, y, x_t, n_t);
  const double te = effective_time(t, params.time_floor);
  const Vector x0 = tweedie_denoise(s_x, x_t, te, schedule, params.time_floor);
  const Vector n0 = tweedie_denoise(s_n, n_t, te, schedule, params.time_floor);
  const Vector residual = y - A.apply(x0) - n0;
  const double inv_rho2 = 1.0 / (params.rho * params.rho);
  LikelihoodScorePair out;
  out.grad_x = inv_rho2 * tweedie_vjp(s_x, x_t, te, schedule, A.adjoint(residual), params.jacobian,
                                      params.time_floor);
  out.grad_n = inv_rho2 * tweedie_vjp(s_n, n_t, te, schedule, residual, params.jacobian,
                                      params.time_floor);
  out.residual_norm = residual.norm();
  return out;
}

Vector corrupt_observation(const LinearOperator& A, const Vector& y, double t, const Vector& z,
                           const DiffusionSchedule& schedule) {
  if (z.size() != A.cols()) throw ShapeError("projection: z must live in signal space");
  if (y.size() != A.rows()) throw ShapeError("projection: y does not match the rows of A");
  const auto [alpha, beta] = schedule.kernel_params(t);
  if (beta == 0.0) return alpha * y;
  return alpha * y + beta * A.apply(z);
}

LikelihoodScorePair projection_scores(const LinearOperator& A, const Vector& y, const Vector& x_t,
                                      const Vector& n_t, double t, const DiffusionSchedule& schedule,
                                      const GuidanceParams& params, const Vector& z) {
  check_dims(A, y, x_t, n_t);
  const Vector y_hat = corrupt_observation(A, y, t, z, schedule);
  const Vector residual = y_hat - A.apply(x_t) - n_t;
  const double inv_rho2 = 1.0 / (params.rho * params.rho);
  LikelihoodScorePair out;
  out.grad_x = checked(inv_rho2 * A.adjoint(residual), "projection");
  out.grad_n = checked(inv_rho2 * residual, "projection");
  out.residual_norm = residual.norm();
  return out;
}

LikelihoodScorePair projection_scores(const LinearOperator& A, const Vector& y, const Vector& x_t,
                                      const Vector& n_t, double t, const DiffusionSchedule& schedule,
                                      const GuidanceParams& params, Rng& rng) {
  const Vector z = standard_normal(A.cols(), rng);
  return projection_scores(A, y, x_t, n_t, t, schedule, params, z);
}

std::pair<double, double> consistency_weights(const GuidanceParams& params, double t,
                                              const DiffusionSchedule& schedule,
                                              double residual_norm) {
  if (!(residual_norm >= 0.0)) throw DomainError("consistency weights: residual norm must be >= 0");
  switch (params.rule) {
    case Rule::PiGDM: {
      const double te = std::max(t, params.time_floor);
      return {params.lambda_prime * params.r_sq(te, schedule),
              params.kappa_prime * params.q_sq(te, schedule)};
    }
    case Rule::DPS: {
      const double rho2 = params.rho * params.rho;
      const double scale = 1.0 / std::max(residual_norm, params.residual_floor);
      return {params.lambda_prime * rho2 * scale, params.kappa_prime * rho2 * scale};
    }
    case Rule::Projection: {
      const double rho2 = params.rho * params.rho;
      return {params.lambda_prime * rho2, params.kappa_prime * rho2};
    }
  }
  return {0.0, 0.0};
}

}  // namespace sndiff
