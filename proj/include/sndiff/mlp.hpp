#pragma once

#include "sndiff/common.hpp"
#include "sndiff/random.hpp"
#include "sndiff/schedule.hpp"
#include "sndiff/score.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace sndiff {

enum class Activation { SiLU, Tanh, Softplus };

Activation parse_activation(const std::string& name);
std::string activation_name(Activation a);

/// Fully connected score network.
///
/// Input features are [c_in(t) * x, t, beta_t / beta_1] with
/// c_in(t) = 1 / sqrt(data_variance + beta_t^2); the linear output head is
/// divided by beta_t when `inv_beta_output` is set, so the network predicts
/// -z rather than -z / beta_t. Time enters only through these features.
class MlpScoreNet final : public ScoreFunction {
 public:
  struct Architecture {
    Eigen::Index dim = 2;
    std::vector<int> hidden = {64, 64};
    Activation activation = Activation::SiLU;
    double data_variance = 1.0;
    bool inv_beta_output = true;
  };

  struct Layer {
    Matrix weight;
    Vector bias;
  };

  /// Random (He-style) initialisation from `init_rng`; the output layer is
  /// scaled down so the untrained score is small.
  MlpScoreNet(Architecture arch, DiffusionSchedule schedule, Rng& init_rng);
  MlpScoreNet(Architecture arch, DiffusionSchedule schedule, std::vector<Layer> layers);

  Eigen::Index dim() const override { return arch_.dim; }
  Vector score(const Vector& x, double t) const override;
  Vector vjp(const Vector& x, double t, const Vector& v) const override;

  /// Batched score: columns of `xs` share one time per column in `ts`.
  Matrix score_batch(const Matrix& xs, const Vector& ts) const;

  /// Accumulates d/dtheta sum_j <upstream_j, score(x_j, t_j)> into `grad`
  /// (flattened parameter layout, see flat_parameters()).
  void accumulate_parameter_gradient(const Matrix& xs, const Vector& ts, const Matrix& upstream,
                                     Vector& grad) const;

  Eigen::Index parameter_count() const;
  Vector flat_parameters() const;
  void set_flat_parameters(const Vector& theta);

  const Architecture& architecture() const { return arch_; }
  const DiffusionSchedule& schedule() const { return schedule_; }
  const std::vector<Layer>& layers() const { return layers_; }

  void save(const std::filesystem::path& path) const;
  static MlpScoreNet load(const std::filesystem::path& path);

 private:
  struct Cache {
    std::vector<Matrix> inputs;       // input to each layer
    std::vector<Matrix> preacts;      // pre-activation of hidden layers
    Vector out_scale;                 // per-column output scale
    Vector in_scale;                  // per-column c_in
  };

  Matrix features(const Matrix& xs, const Vector& ts, Vector& in_scale, Vector& out_scale) const;
  Matrix forward(const Matrix& xs, const Vector& ts, Cache* cache) const;
  /// Back-propagates `grad_out` (gradient w.r.t. the score) through the
  /// cached graph; returns the gradient w.r.t. x and optionally accumulates
  /// parameter gradients.
  Matrix backward(const Cache& cache, const Matrix& grad_out, Vector* param_grad) const;
  void validate() const;

  Architecture arch_;
  DiffusionSchedule schedule_;
  std::vector<Layer> layers_;
};

}  // namespace sndiff
