#pragma once

#include "sndiff/mlp.hpp"
#include "sndiff/schedule.hpp"
#include "sndiff/score.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace sndiff {

/// Raised when the training objective becomes non-finite.
class TrainingError : public NumericError {
 public:
  TrainingError(const std::string& what, int step) : NumericError(what), step_(step) {}
  int step() const { return step_; }

 private:
  int step_;
};

/// Per-sample weighting of the denoising score matching residual.
/// `None` is the plain objective; `BetaSquared` multiplies by beta_t^2.
enum class LossWeighting { None, BetaSquared };

LossWeighting parse_loss_weighting(const std::string& name);
std::string loss_weighting_name(LossWeighting w);

struct TrainConfig {
  int batch_size = 64;
  int steps = 5000;
  double learning_rate = 1e-3;
  double momentum = 0.9;
  double epsilon = 1e-3;  // t ~ U[epsilon, 1]
  LossWeighting weighting = LossWeighting::None;
  double grad_clip = 0.0;  // global-norm clip, 0 disables
  int log_every = 100;
  std::uint64_t seed = 0;

  void validate() const;
};

/// ||s(x_t, t) + z / beta_t||^2 for x_t = alpha_t x0 + beta_t z.
/// Throws DomainError when beta_t = 0.
double dsm_sample_loss(const ScoreFunction& model, const Vector& x0, double t, const Vector& z,
                       const DiffusionSchedule& schedule);

/// Monte-Carlo denoising score matching loss over a batch: one (t, z) draw
/// per sample with t ~ U[epsilon, 1].
double dsm_loss(const ScoreFunction& model, const std::vector<Vector>& batch,
                const DiffusionSchedule& schedule, Rng& rng, double epsilon = kDefaultTimeFloor);

struct TrainResult {
  std::vector<int> trace_steps;     // last step index of each window
  std::vector<double> loss_trace;   // mean training objective per window
  int steps_run = 0;
};

/// Minimises the (weighted) DSM objective with SGD + momentum.
TrainResult train_dsm(MlpScoreNet& model, const std::vector<Vector>& dataset,
                      const TrainConfig& config, const DiffusionSchedule& schedule);

}  // namespace sndiff
