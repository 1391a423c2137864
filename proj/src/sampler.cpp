#include "sndiff/sampler.hpp"

namespace sndiff {

StepOrder parse_step_order(const std::string& name) {
  if (name == "dc_first") return StepOrder::DcFirst;
  if (name == "uncond_first") return StepOrder::UncondFirst;
  throw ConfigError("unknown step order '" + name + "' (expected dc_first or uncond_first)");
}

std::string step_order_name(StepOrder order) {
  return order == StepOrder::DcFirst ? "dc_first" : "uncond_first";
}

void SamplerConfig::validate() const {
  if (steps < 1) throw ConfigError("sampler: steps must be >= 1");
  if (chains < 1) throw ConfigError("sampler: chains must be >= 1");
  if (!(divergence_factor > 0.0)) throw ConfigError("sampler: divergence_factor must be > 0");
  guidance.validate();
}

Vector unconditional_reverse_step(const Vector& state, double t, double dt,
                                  const ScoreFunction& score, const DiffusionSchedule& schedule,
                                  Rng& rng, bool add_noise) {
  check_time(t, "reverse step");
  if (!(dt > 0.0)) throw DomainError("reverse step: dt must be > 0");
  const double g = schedule.diffusion(t);
  const Vector s = score_at(score, state, t);
  Vector next = state - schedule.drift(t) * state * dt + g * g * s * dt;
  if (add_noise) next += g * std::sqrt(dt) * standard_normal(state.size(), rng);
  if (!next.allFinite()) throw NumericError("reverse step: non-finite state");
  return next;
}

namespace {

LikelihoodScorePair rule_scores(const Vector& x_t, const Vector& n_t, double t,
                                const LinearOperator& A, const Vector& y, const ScoreFunction& s_x,
                                const ScoreFunction& s_n, const GuidanceParams& guidance,
                                const DiffusionSchedule& schedule, const Vector& z) {
  switch (guidance.rule) {
    case Rule::PiGDM: return pigdm_scores(A, y, x_t, n_t, t, s_x, s_n, guidance, schedule);
    case Rule::DPS: return dps_scores(A, y, x_t, n_t, t, s_x, s_n, guidance, schedule);
    case Rule::Projection: return projection_scores(A, y, x_t, n_t, t, schedule, guidance, z);
  }
  throw ConfigError("unknown guidance rule");
}

}  // namespace

ConsistencyResult data_consistency_step(const Vector& x_t, const Vector& n_t, double t,
                                        const LinearOperator& A, const Vector& y,
                                        const ScoreFunction& s_x, const ScoreFunction& s_n,
                                        const GuidanceParams& guidance,
                                        const DiffusionSchedule& schedule, const Vector& z) {
  const LikelihoodScorePair g = rule_scores(x_t, n_t, t, A, y, s_x, s_n, guidance, schedule, z);
  const auto [w_x, w_n] = consistency_weights(guidance, t, schedule, g.residual_norm);
  ConsistencyResult out;
  out.x = x_t + w_x * g.grad_x;
  out.n = n_t + w_n * g.grad_n;
  out.residual_norm = g.residual_norm;
  if (!out.x.allFinite() || !out.n.allFinite()) throw NumericError("data consistency: non-finite state");
  return out;
}

ConsistencyResult data_consistency_step(const Vector& x_t, const Vector& n_t, double t,
                                        const LinearOperator& A, const Vector& y,
                                        const ScoreFunction& s_x, const ScoreFunction& s_n,
                                        const GuidanceParams& guidance,
                                        const DiffusionSchedule& schedule, Rng& rng) {
  const Vector z = guidance.rule == Rule::Projection ? standard_normal(A.cols(), rng) : Vector();
  return data_consistency_step(x_t, n_t, t, A, y, s_x, s_n, guidance, schedule, z);
}

PosteriorRun sample_chain(const InverseProblem& problem, const ScoreFunction& s_x,
                          const ScoreFunction& s_n, const SamplerConfig& config, std::size_t chain) {
  config.validate();
  const LinearOperator A = problem.forward();
  const Eigen::Index d = A.cols();
  const Eigen::Index m = A.rows();
  if (problem.y.size() != m) throw ShapeError("sampler: y does not match the rows of A");
  if (s_x.dim() != d) throw ShapeError("sampler: signal score dimension does not match A");
  if (s_n.dim() != m) throw ShapeError("sampler: noise score dimension does not match A");

  const DiffusionSchedule& schedule = config.schedule;
  const GuidanceParams& guidance = config.guidance;
  Rng init_rng = make_rng(config.seed, Stream::Init, chain);
  Rng x_rng = make_rng(config.seed, Stream::SignalDiffusion, chain);
  Rng n_rng = make_rng(config.seed, Stream::NoiseDiffusion, chain);
  Rng proj_rng = make_rng(config.seed, Stream::Projection, chain);

  PosteriorRun run;
  run.x_init = schedule.prior_sample(d, init_rng);
  run.n_init = schedule.prior_sample(m, init_rng);
  run.diagnostics.reserve(config.steps);
  Vector x = run.x_init;
  Vector n = run.n_init;
  const Vector frozen_z = guidance.projection_noise == ProjectionNoise::Frozen
                              ? standard_normal(d, proj_rng)
                              : Vector();
  const double limit_x = config.divergence_factor * schedule.prior_std() * std::sqrt(static_cast<double>(d));
  const double limit_n = config.divergence_factor * schedule.prior_std() * std::sqrt(static_cast<double>(m));
  const double dt = 1.0 / config.steps;

  auto fail = [&](const std::string& why, int step) {
    run.x0_hat = x;
    run.n0_hat = n;
    throw SamplingError("chain " + std::to_string(chain) + ", step " + std::to_string(step) + ": " + why,
                        step, chain, std::move(run));
  };

  auto dc_step = [&](double t, StepDiagnostics& diag) {
    Vector z;
    if (guidance.rule == Rule::Projection) {
      z = guidance.projection_noise == ProjectionNoise::Frozen ? frozen_z : standard_normal(d, proj_rng);
    }
    ConsistencyResult r = data_consistency_step(x, n, t, A, problem.y, s_x, s_n, guidance, schedule, z);
    diag.residual_norm = r.residual_norm;
    diag.dc_step_x = (r.x - x).norm();
    diag.dc_step_n = (r.n - n).norm();
    x = std::move(r.x);
    n = std::move(r.n);
  };

  auto reverse_step = [&](double t, int i, StepDiagnostics& diag) {
    const bool noise = !(config.denoise_last && i == 0);
    Vector nx = unconditional_reverse_step(x, t, dt, s_x, schedule, x_rng, noise);
    Vector nn = unconditional_reverse_step(n, t, dt, s_n, schedule, n_rng, noise);
    diag.reverse_step_x = (nx - x).norm();
    diag.reverse_step_n = (nn - n).norm();
    x = std::move(nx);
    n = std::move(nn);
  };

  for (int i = config.steps - 1; i >= 0; --i) {
    const double t = static_cast<double>(i + 1) / config.steps;
    StepDiagnostics diag;
    diag.step = i;
    diag.t = t;
    try {
      if (config.order == StepOrder::DcFirst) {
        dc_step(t, diag);
        reverse_step(t, i, diag);
      } else {
        reverse_step(t, i, diag);
        if (i > 0) dc_step(static_cast<double>(i) / config.steps, diag);
      }
    } catch (const SamplingError&) {
      throw;
    } catch (const NumericError& e) {
      fail(e.what(), i);
    }
    run.diagnostics.push_back(diag);
    if (!x.allFinite() || !n.allFinite()) fail("non-finite state", i);
    if (x.norm() > limit_x || n.norm() > limit_n) fail("state diverged", i);
    if (config.record_trajectory) {
      run.x_trajectory.push_back(x);
      run.n_trajectory.push_back(n);
    }
  }
  run.x0_hat = std::move(x);
  run.n0_hat = std::move(n);
  return run;
}

std::vector<PosteriorRun> sample_posterior(const InverseProblem& problem, const ScoreFunction& s_x,
                                           const ScoreFunction& s_n, const SamplerConfig& config) {
  config.validate();
  std::vector<PosteriorRun> runs(static_cast<std::size_t>(config.chains));
  parallel_for(runs.size(), config.threads,
               [&](std::size_t c) { runs[c] = sample_chain(problem, s_x, s_n, config, c); });
  return runs;
}

}  // namespace sndiff
