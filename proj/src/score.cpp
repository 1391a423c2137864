#include "sndiff/score.hpp"

#include <numbers>
#include <string>

namespace sndiff {

namespace {

double clamp_time(double t, double time_floor, const char* what) {
  check_time(t, what);
  return std::max(t, time_floor);
}

}  // namespace

Vector score_at(const ScoreFunction& model, const Vector& x, double t, double time_floor) {
  const double te = clamp_time(t, time_floor, "score_at");
  if (x.size() != model.dim()) throw ShapeError("score_at: input dimension mismatch");
  if (!all_finite(x)) throw NumericError("score_at: non-finite input");
  Vector s = model.score(x, te);
  if (!all_finite(s)) throw NumericError("score_at: non-finite score at t=" + std::to_string(te));
  return s;
}

Vector vjp_at(const ScoreFunction& model, const Vector& x, double t, const Vector& v,
              double time_floor) {
  const double te = clamp_time(t, time_floor, "vjp_at");
  if (x.size() != model.dim() || v.size() != model.dim()) {
    throw ShapeError("vjp_at: dimension mismatch");
  }
  if (!all_finite(x) || !all_finite(v)) throw NumericError("vjp_at: non-finite input");
  Vector out = model.vjp(x, te, v);
  if (!all_finite(out)) throw NumericError("vjp_at: non-finite result at t=" + std::to_string(te));
  return out;
}

// ---------------------------------------------------------------------------

AnalyticGaussianScore::AnalyticGaussianScore(Vector mean, const Matrix& covariance,
                                             DiffusionSchedule schedule)
    : mean_(std::move(mean)), diagonal_(false), schedule_(schedule) {
  if (covariance.rows() != mean_.size() || covariance.cols() != mean_.size()) {
    throw ShapeError("AnalyticGaussianScore: covariance must be d x d");
  }
  if (!covariance.allFinite()) throw NumericError("AnalyticGaussianScore: non-finite covariance");
  const Matrix sym = 0.5 * (covariance + covariance.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> eig(sym);
  if (eig.info() != Eigen::Success) {
    throw NumericError("AnalyticGaussianScore: eigendecomposition failed");
  }
  const double tol = 1e-12 * std::max(1.0, eig.eigenvalues().cwiseAbs().maxCoeff());
  if (eig.eigenvalues().minCoeff() < -tol) {
    throw ConfigError("AnalyticGaussianScore: covariance is not positive semi-definite");
  }
  eigenvalues_ = eig.eigenvalues().cwiseMax(0.0);
  eigenvectors_ = eig.eigenvectors();
}

AnalyticGaussianScore::AnalyticGaussianScore(Vector mean, const Vector& variances,
                                             DiffusionSchedule schedule)
    : mean_(std::move(mean)), diagonal_(true), eigenvalues_(variances), schedule_(schedule) {
  if (variances.size() != mean_.size()) {
    throw ShapeError("AnalyticGaussianScore: variance vector must have dimension d");
  }
  if (!variances.allFinite() || variances.minCoeff() < 0.0) {
    throw ConfigError("AnalyticGaussianScore: variances must be finite and non-negative");
  }
}

AnalyticGaussianScore AnalyticGaussianScore::fit(const std::vector<Vector>& samples, double floor,
                                                 DiffusionSchedule schedule) {
  if (samples.size() < 2) throw DataError("fit: need at least two samples");
  const Eigen::Index d = samples.front().size();
  Vector mean = Vector::Zero(d);
  for (const auto& s : samples) {
    if (s.size() != d) throw ShapeError("fit: inconsistent sample dimensions");
    mean += s;
  }
  mean /= static_cast<double>(samples.size());
  Matrix centered(d, static_cast<Eigen::Index>(samples.size()));
  for (std::size_t i = 0; i < samples.size(); ++i) {
    centered.col(static_cast<Eigen::Index>(i)) = samples[i] - mean;
  }
  Matrix cov = centered * centered.transpose() / static_cast<double>(samples.size() - 1);
  cov.diagonal().array() += floor;
  return AnalyticGaussianScore(std::move(mean), cov, schedule);
}

Vector AnalyticGaussianScore::apply_neg_precision(const Vector& v, double t) const {
  const double a = schedule_.alpha(t);
  const double b2 = schedule_.beta_sq(t);
  const Vector denom = (a * a) * eigenvalues_.array() + b2;
  if (denom.minCoeff() <= 0.0) {
    throw NumericError("AnalyticGaussianScore: singular perturbed covariance at t=" +
                       std::to_string(t));
  }
  if (diagonal_) return -(v.array() / denom.array()).matrix();
  const Vector coeffs = (eigenvectors_.transpose() * v).array() / denom.array();
  return -(eigenvectors_ * coeffs);
}

Vector AnalyticGaussianScore::score(const Vector& x, double t) const {
  return apply_neg_precision(x - schedule_.alpha(t) * mean_, t);
}

Vector AnalyticGaussianScore::vjp(const Vector& /*x*/, double t, const Vector& v) const {
  // The Jacobian is the constant symmetric matrix -(a^2 Sigma + b^2 I)^{-1}.
  return apply_neg_precision(v, t);
}

double AnalyticGaussianScore::log_density(const Vector& x, double t) const {
  const double a = schedule_.alpha(t);
  const Vector denom = (a * a) * eigenvalues_.array() + schedule_.beta_sq(t);
  const Vector diff = x - a * mean_;
  const Vector proj = diagonal_ ? diff : Vector(eigenvectors_.transpose() * diff);
  const double quad = (proj.array().square() / denom.array()).sum();
  const double logdet = denom.array().log().sum();
  return -0.5 * (quad + logdet + static_cast<double>(dim()) * std::log(2.0 * std::numbers::pi));
}

Vector AnalyticGaussianScore::sample(Rng& rng) const {
  const Vector z = standard_normal(dim(), rng);
  const Vector scaled = eigenvalues_.array().sqrt() * z.array();
  if (diagonal_) return mean_ + scaled;
  return mean_ + eigenvectors_ * scaled;
}

Matrix AnalyticGaussianScore::covariance() const {
  if (diagonal_) return eigenvalues_.asDiagonal();
  return eigenvectors_ * eigenvalues_.asDiagonal() * eigenvectors_.transpose();
}

// ---------------------------------------------------------------------------

GaussianMixtureScore::GaussianMixtureScore(Vector weights, std::vector<Vector> means,
                                           std::vector<Vector> variances,
                                           DiffusionSchedule schedule)
    : weights_(std::move(weights)),
      means_(std::move(means)),
      variances_(std::move(variances)),
      schedule_(schedule) {
  const auto k = static_cast<std::size_t>(weights_.size());
  if (k == 0 || means_.size() != k || variances_.size() != k) {
    throw ConfigError("GaussianMixtureScore: weights, means and variances must have equal length");
  }
  if (weights_.minCoeff() <= 0.0 || std::abs(weights_.sum() - 1.0) > 1e-9) {
    throw ConfigError("GaussianMixtureScore: weights must be positive and sum to 1");
  }
  const Eigen::Index d = means_.front().size();
  for (std::size_t i = 0; i < k; ++i) {
    if (means_[i].size() != d || variances_[i].size() != d) {
      throw ShapeError("GaussianMixtureScore: component dimension mismatch");
    }
    if (variances_[i].minCoeff() < 0.0) {
      throw ConfigError("GaussianMixtureScore: variances must be non-negative");
    }
  }
}

GaussianMixtureScore::Parts GaussianMixtureScore::parts(const Vector& x, double t) const {
  const double a = schedule_.alpha(t);
  const double b2 = schedule_.beta_sq(t);
  const std::size_t k = means_.size();
  Parts p;
  p.responsibilities.resize(static_cast<Eigen::Index>(k));
  p.component_scores.reserve(k);
  p.total_variances.reserve(k);
  const double log2pi = std::log(2.0 * std::numbers::pi);
  for (std::size_t i = 0; i < k; ++i) {
    Vector s = (a * a) * variances_[i].array() + b2;
    if (s.minCoeff() <= 0.0) {
      throw NumericError("GaussianMixtureScore: singular component at t=" + std::to_string(t));
    }
    const Vector diff = x - a * means_[i];
    p.component_scores.push_back(-(diff.array() / s.array()).matrix());
    p.responsibilities[static_cast<Eigen::Index>(i)] =
        std::log(weights_[static_cast<Eigen::Index>(i)]) -
        0.5 * ((diff.array().square() / s.array()).sum() + s.array().log().sum() +
               static_cast<double>(x.size()) * log2pi);
    p.total_variances.push_back(std::move(s));
  }
  const double mx = p.responsibilities.maxCoeff();
  const Vector e = (p.responsibilities.array() - mx).exp();
  const double total = e.sum();
  p.log_density = mx + std::log(total);
  p.responsibilities = e / total;
  return p;
}

Vector GaussianMixtureScore::score(const Vector& x, double t) const {
  const Parts p = parts(x, t);
  Vector out = Vector::Zero(x.size());
  for (std::size_t i = 0; i < means_.size(); ++i) {
    out += p.responsibilities[static_cast<Eigen::Index>(i)] * p.component_scores[i];
  }
  return out;
}

Vector GaussianMixtureScore::vjp(const Vector& x, double t, const Vector& v) const {
  // Hessian of a log-mixture: E_r[H_k] + Cov_r[s_k], symmetric.
  const Parts p = parts(x, t);
  Vector mean_score = Vector::Zero(x.size());
  Vector out = Vector::Zero(x.size());
  for (std::size_t i = 0; i < means_.size(); ++i) {
    const double r = p.responsibilities[static_cast<Eigen::Index>(i)];
    const Vector& sk = p.component_scores[i];
    mean_score += r * sk;
    out += r * (-(v.array() / p.total_variances[i].array())).matrix();
    out += r * sk.dot(v) * sk;
  }
  out -= mean_score.dot(v) * mean_score;
  return out;
}

double GaussianMixtureScore::log_density(const Vector& x, double t) const {
  return parts(x, t).log_density;
}

Vector GaussianMixtureScore::sample(Rng& rng) const {
  std::discrete_distribution<std::size_t> pick(weights_.data(), weights_.data() + weights_.size());
  const std::size_t k = pick(rng);
  return means_[k] + (variances_[k].array().sqrt() * standard_normal(dim(), rng).array()).matrix();
}

}  // namespace sndiff
