#pragma once

#include "sndiff/guidance.hpp"
#include "sndiff/problems.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace sndiff {

enum class StepOrder { DcFirst, UncondFirst };

StepOrder parse_step_order(const std::string& name);
std::string step_order_name(StepOrder order);

struct SamplerConfig {
  int steps = 600;
  DiffusionSchedule schedule;
  GuidanceParams guidance;
  bool record_trajectory = false;
  int chains = 1;
  std::uint64_t seed = 0;
  bool denoise_last = true;  // no noise injection on the final step
  StepOrder order = StepOrder::DcFirst;
  double divergence_factor = 1e6;
  unsigned threads = 0;  // 0 = hardware concurrency

  void validate() const;
};

struct StepDiagnostics {
  int step = 0;  // i, counting down from T-1 to 0
  double t = 0.0;
  double residual_norm = 0.0;
  double dc_step_x = 0.0;  // norm of the data-consistency update
  double dc_step_n = 0.0;
  double reverse_step_x = 0.0;  // norm of the unconditional update
  double reverse_step_n = 0.0;
};

struct PosteriorRun {
  Vector x0_hat;
  Vector n0_hat;
  Vector x_init;
  Vector n_init;
  std::vector<StepDiagnostics> diagnostics;
  std::vector<Vector> x_trajectory;  // states after each step, if recorded
  std::vector<Vector> n_trajectory;
};

/// Raised when a chain produces non-finite or divergent states. Carries the
/// diagnostics collected up to the failing step.
class SamplingError : public NumericError {
 public:
  SamplingError(const std::string& what, int step, std::size_t chain, PosteriorRun partial)
      : NumericError(what), step_(step), chain_(chain), partial_(std::move(partial)) {}
  int step() const { return step_; }
  std::size_t chain() const { return chain_; }
  const PosteriorRun& partial() const { return partial_; }

 private:
  int step_;
  std::size_t chain_;
  PosteriorRun partial_;
};

/// state + g(t)^2 s(state, t) dt + g(t) sqrt(dt) z (the noise term is
/// omitted when `add_noise` is false).
Vector unconditional_reverse_step(const Vector& state, double t, double dt,
                                  const ScoreFunction& score, const DiffusionSchedule& schedule,
                                  Rng& rng, bool add_noise = true);

struct ConsistencyResult {
  Vector x;
  Vector n;
  double residual_norm = 0.0;
};

/// One data-consistency update x += w_x grad_x, n += w_n grad_n. `z` is
/// the projection draw (ignored by the other rules).
ConsistencyResult data_consistency_step(const Vector& x_t, const Vector& n_t, double t,
                                        const LinearOperator& A, const Vector& y,
                                        const ScoreFunction& s_x, const ScoreFunction& s_n,
                                        const GuidanceParams& guidance,
                                        const DiffusionSchedule& schedule, const Vector& z);
ConsistencyResult data_consistency_step(const Vector& x_t, const Vector& n_t, double t,
                                        const LinearOperator& A, const Vector& y,
                                        const ScoreFunction& s_x, const ScoreFunction& s_n,
                                        const GuidanceParams& guidance,
                                        const DiffusionSchedule& schedule, Rng& rng);

/// Runs one chain of joint posterior sampling for the effective problem
/// y = (a A) x + (b n).
PosteriorRun sample_chain(const InverseProblem& problem, const ScoreFunction& s_x,
                          const ScoreFunction& s_n, const SamplerConfig& config, std::size_t chain);

/// All `config.chains` chains; results are ordered by chain index and do not
/// depend on the thread count.
std::vector<PosteriorRun> sample_posterior(const InverseProblem& problem, const ScoreFunction& s_x,
                                           const ScoreFunction& s_n, const SamplerConfig& config);

}  // namespace sndiff
