#include "sndiff/training.hpp"

namespace sndiff {

LossWeighting parse_loss_weighting(const std::string& name) {
  if (name == "none") return LossWeighting::None;
  if (name == "beta_squared") return LossWeighting::BetaSquared;
  throw ConfigError("unknown loss weighting '" + name + "' (expected none or beta_squared)");
}

std::string loss_weighting_name(LossWeighting w) {
  return w == LossWeighting::None ? "none" : "beta_squared";
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
  if (steps < 0) throw ConfigError("train: steps must be >= 0");
  if (!(learning_rate > 0.0)) throw ConfigError("train: learning_rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train: momentum must be in [0, 1)");
  if (!(epsilon > 0.0 && epsilon <= 0.1)) throw ConfigError("train: epsilon must be in (0, 0.1]");
  if (!(grad_clip >= 0.0)) throw ConfigError("train: grad_clip must be >= 0");
  if (log_every < 1) throw ConfigError("train: log_every must be >= 1");
}

double dsm_sample_loss(const ScoreFunction& model, const Vector& x0, double t, const Vector& z,
                       const DiffusionSchedule& schedule) {
  const auto [alpha, beta] = schedule.kernel_params(t);
  if (!(beta > 0.0)) throw DomainError("dsm loss: beta_t = 0 at t=" + std::to_string(t));
  require_same_size(x0, z, "dsm loss");
  const Vector xt = alpha * x0 + beta * z;
  return (model.score(xt, t) + z / beta).squaredNorm();
}

double dsm_loss(const ScoreFunction& model, const std::vector<Vector>& batch,
                const DiffusionSchedule& schedule, Rng& rng, double epsilon) {
  if (batch.empty()) throw DataError("dsm loss: empty batch");
  double total = 0.0;
  for (const auto& x0 : batch) {
    const double t = uniform(epsilon, 1.0, rng);
    const Vector z = standard_normal(x0.size(), rng);
    total += dsm_sample_loss(model, x0, t, z, schedule);
  }
  return total / static_cast<double>(batch.size());
}

TrainResult train_dsm(MlpScoreNet& model, const std::vector<Vector>& dataset,
                      const TrainConfig& config, const DiffusionSchedule& schedule) {
  config.validate();
  if (dataset.empty()) throw DataError("train: empty dataset");
  const Eigen::Index d = model.dim();
  for (const auto& x : dataset) {
    if (x.size() != d) throw ShapeError("train: dataset dimension does not match the model");
  }

  Rng rng = make_rng(config.seed, Stream::Training);
  std::uniform_int_distribution<std::size_t> pick(0, dataset.size() - 1);
  std::normal_distribution<double> normal(0.0, 1.0);

  TrainResult result;
  Vector theta = model.flat_parameters();
  Vector velocity = Vector::Zero(theta.size());
  Vector grad(theta.size());
  Matrix xs(d, config.batch_size);
  Matrix zs(d, config.batch_size);
  Vector ts(config.batch_size);
  Vector betas(config.batch_size);
  double window_sum = 0.0;
  int window_count = 0;
  const double inv_b = 1.0 / config.batch_size;

  for (int step = 0; step < config.steps; ++step) {
    for (int j = 0; j < config.batch_size; ++j) {
      ts[j] = uniform(config.epsilon, 1.0, rng);
      betas[j] = schedule.beta(ts[j]);
      for (Eigen::Index i = 0; i < d; ++i) zs(i, j) = normal(rng);
      xs.col(j) = schedule.alpha(ts[j]) * dataset[pick(rng)] + betas[j] * zs.col(j);
    }
    const Matrix s = model.score_batch(xs, ts);
    // residual_j = s_j + z_j / beta_j
    Matrix residual = s + zs * betas.cwiseInverse().asDiagonal();
    Vector weights = Vector::Ones(config.batch_size);
    if (config.weighting == LossWeighting::BetaSquared) weights = betas.array().square();
    const double loss = (residual.colwise().squaredNorm().transpose().array() * weights.array()).sum() * inv_b;
    if (!std::isfinite(loss)) {
      throw TrainingError("train: non-finite loss at step " + std::to_string(step), step);
    }
    grad.setZero();
    model.accumulate_parameter_gradient(xs, ts, residual * (2.0 * inv_b * weights).asDiagonal(),
                                        grad);
    if (!grad.allFinite()) {
      throw TrainingError("train: non-finite gradient at step " + std::to_string(step), step);
    }
    if (config.grad_clip > 0.0) {
      const double norm = grad.norm();
      if (norm > config.grad_clip) grad *= config.grad_clip / norm;
    }
    velocity = config.momentum * velocity - config.learning_rate * grad;
    theta += velocity;
    model.set_flat_parameters(theta);

    window_sum += loss;
    ++window_count;
    if (window_count == config.log_every || step + 1 == config.steps) {
      result.trace_steps.push_back(step);
      result.loss_trace.push_back(window_sum / window_count);
      window_sum = 0.0;
      window_count = 0;
    }
    result.steps_run = step + 1;
  }
  return result;
}

}  // namespace sndiff
