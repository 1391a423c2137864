#include "sndiff/oracle.hpp"
#include "sndiff/sampler.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <algorithm>

using namespace sndiff;

namespace {

class ZeroScore final : public ScoreFunction {
 public:
  explicit ZeroScore(Eigen::Index d) : d_(d) {}
  Eigen::Index dim() const override { return d_; }
  Vector score(const Vector& x, double) const override { return Vector::Zero(x.size()); }
  Vector vjp(const Vector& x, double, const Vector&) const override { return Vector::Zero(x.size()); }

 private:
  Eigen::Index d_;
};

struct LinearGaussian {
  DiffusionSchedule schedule;
  Matrix a;
  Vector mx, mn;
  Matrix Sx, Sn;
  AnalyticGaussianScore sx, sn;
  InverseProblem problem;

  static LinearGaussian make(Eigen::Index m, Eigen::Index d, std::uint64_t seed) {
    Rng rng(seed);
    DiffusionSchedule s;
    Matrix a = m == d ? Matrix(Matrix::Identity(d, d)) : Matrix(Matrix::Zero(m, d));
    if (m != d)
      for (Eigen::Index i = 0; i < m; ++i) a.row(i) = standard_normal(d, rng).transpose() / std::sqrt(double(m));
    const Vector mx = standard_normal(d, rng);
    const Vector mn = 0.2 * standard_normal(m, rng);
    const Matrix Sx = sndiff::testing::random_spd(d, rng, 0.3);
    const Matrix Sn = 0.5 * sndiff::testing::random_spd(m, rng, 0.3);
    AnalyticGaussianScore sx(mx, Sx, s), sn(mn, Sn, s);
    const auto A = m == d ? LinearOperator::identity(d) : LinearOperator::dense(a);
    InverseProblem p = observe(sx.sample(rng), A, sn.sample(rng));
    return {s, a, mx, mn, Sx, Sn, sx, sn, p};
  }
};

SamplerConfig base_config(Rule rule, double lambda, int chains) {
  SamplerConfig c;
  c.steps = 200;
  c.chains = chains;
  c.seed = 17;
  c.guidance.rule = rule;
  c.guidance.lambda_prime = lambda;
  c.guidance.kappa_prime = lambda;
  return c;
}

double rule_residual(Rule rule, const LinearGaussian& lg, const Vector& x, const Vector& n, double t,
                     const Vector& z) {
  const auto A = lg.problem.forward();
  if (rule == Rule::Projection)
    return (corrupt_observation(A, lg.problem.y, t, z, lg.schedule) - A.apply(x) - n).norm();
  return (lg.problem.y - A.apply(tweedie_denoise(lg.sx, x, t, lg.schedule)) -
          tweedie_denoise(lg.sn, n, t, lg.schedule))
      .norm();
}

}  // namespace

TEST(ReverseStep, ZeroScoreIsUnbiased) {
  DiffusionSchedule s;
  ZeroScore zero(2);
  Rng rng(1);
  const Vector state(Vector::LinSpaced(2, -1.0, 1.0));
  const int n = 10000;
  const double t = 0.5, dt = 1.0 / 600;
  Vector sum = Vector::Zero(2);
  for (int k = 0; k < n; ++k) sum += unconditional_reverse_step(state, t, dt, zero, s, rng);
  const double se = s.diffusion(t) * std::sqrt(dt / n);
  for (int i = 0; i < 2; ++i) EXPECT_NEAR(sum[i] / n, state[i], 3.0 * se);
}

TEST(ReverseStep, NoNoiseOption) {
  DiffusionSchedule s;
  ZeroScore zero(3);
  Rng rng(1);
  const Vector state = Vector::Ones(3);
  EXPECT_EQ(unconditional_reverse_step(state, 0.2, 0.01, zero, s, rng, false), state);
}

TEST(ReverseStep, UnguidedRunReproducesPrior) {
  DiffusionSchedule s;
  Rng rng(2);
  const Vector mean(Vector::LinSpaced(4, -1.0, 1.0));
  const Vector var(Vector::LinSpaced(4, 0.3, 1.5));
  AnalyticGaussianScore prior(mean, var, s);
  InverseProblem p = observe(Vector::Zero(4), LinearOperator::identity(4), Vector::Zero(4));
  auto cfg = base_config(Rule::PiGDM, 0.0, 1000);
  cfg.steps = 600;
  const auto runs = sample_posterior(p, prior, prior, cfg);
  Vector sum = Vector::Zero(4), sq = Vector::Zero(4);
  for (const auto& r : runs) {
    sum += r.x0_hat;
    sq += (r.x0_hat - mean).cwiseProduct(r.x0_hat - mean);
  }
  const double n = runs.size();
  for (int i = 0; i < 4; ++i) {
    EXPECT_NEAR(sum[i] / n, mean[i], 3.0 * std::sqrt(var[i] / n)) << i;
    EXPECT_NEAR(sq[i] / n, var[i], 3.0 * var[i] * std::sqrt(2.0 / n)) << i;
  }
}

TEST(DataConsistency, ZeroResidualLeavesStateUnchanged) {
  DiffusionSchedule s;
  ZeroScore zx(3), zn(3);
  GuidanceParams p;
  const Vector x = Vector::Constant(3, 0.4), n = Vector::Constant(3, 0.1);
  Rng rng(3);
  const auto r = data_consistency_step(x, n, 0.5, LinearOperator::identity(3), x + n, zx, zn, p, s, rng);
  EXPECT_LT((r.x - x).norm(), 1e-15);
  EXPECT_LT((r.n - n).norm(), 1e-15);
}

TEST(DataConsistency, ZeroWeightsLeaveStateUnchanged) {
  auto lg = LinearGaussian::make(4, 4, 4);
  Rng rng(4);
  for (Rule rule : {Rule::PiGDM, Rule::DPS, Rule::Projection}) {
    GuidanceParams p;
    p.rule = rule;
    p.lambda_prime = p.kappa_prime = 0.0;
    const Vector x = standard_normal(4, rng), n = standard_normal(4, rng);
    const auto r = data_consistency_step(x, n, 0.5, lg.problem.forward(), lg.problem.y, lg.sx, lg.sn, p,
                                         lg.schedule, rng);
    EXPECT_EQ(r.x, x);
    EXPECT_EQ(r.n, n);
  }
}

TEST(DataConsistency, SmallStepReducesResidual) {
  for (auto [m, d] : {std::pair{8, 8}, std::pair{6, 10}}) {
    auto lg = LinearGaussian::make(m, d, 5 + m);
    Rng rng(5);
    for (Rule rule : {Rule::PiGDM, Rule::DPS, Rule::Projection}) {
      GuidanceParams p;
      p.rule = rule;
      p.lambda_prime = p.kappa_prime = 1e-3;
      for (int k = 0; k < 10; ++k) {
        const double t = uniform(0.05, 1.0, rng);
        const Vector x = lg.schedule.beta(t) * standard_normal(d, rng);
        const Vector n = lg.schedule.beta(t) * standard_normal(m, rng);
        const Vector z = standard_normal(d, rng);
        const auto r = data_consistency_step(x, n, t, lg.problem.forward(), lg.problem.y, lg.sx, lg.sn, p,
                                             lg.schedule, z);
        EXPECT_LT(rule_residual(rule, lg, r.x, r.n, t, z), rule_residual(rule, lg, x, n, t, z))
            << rule_name(rule) << " t=" << t;
      }
    }
  }
}

TEST(SamplePosterior, BitIdenticalForSameSeed) {
  auto lg = LinearGaussian::make(4, 4, 6);
  for (Rule rule : {Rule::PiGDM, Rule::DPS, Rule::Projection}) {
    auto cfg = base_config(rule, 0.5, 3);
    const auto a = sample_posterior(lg.problem, lg.sx, lg.sn, cfg);
    const auto b = sample_posterior(lg.problem, lg.sx, lg.sn, cfg);
    for (int c = 0; c < 3; ++c) {
      EXPECT_EQ(a[c].x0_hat, b[c].x0_hat);
      EXPECT_EQ(a[c].n0_hat, b[c].n0_hat);
    }
  }
}

TEST(SamplePosterior, ThreadCountDoesNotChangeResults) {
  auto lg = LinearGaussian::make(4, 4, 7);
  auto cfg = base_config(Rule::Projection, 0.5, 6);
  cfg.threads = 1;
  const auto a = sample_posterior(lg.problem, lg.sx, lg.sn, cfg);
  cfg.threads = 3;
  const auto b = sample_posterior(lg.problem, lg.sx, lg.sn, cfg);
  for (int c = 0; c < 6; ++c) EXPECT_EQ(a[c].x0_hat, b[c].x0_hat);
}

TEST(SamplePosterior, RuleSwapKeepsSharedRandomness) {
  auto lg = LinearGaussian::make(4, 4, 8);
  std::vector<std::vector<PosteriorRun>> runs;
  for (Rule rule : {Rule::PiGDM, Rule::DPS, Rule::Projection}) {
    runs.push_back(sample_posterior(lg.problem, lg.sx, lg.sn, base_config(rule, 0.0, 2)));
  }
  for (int c = 0; c < 2; ++c) {
    EXPECT_EQ(runs[0][c].x_init, runs[2][c].x_init);
    EXPECT_EQ(runs[0][c].n_init, runs[1][c].n_init);
    EXPECT_EQ(runs[0][c].x0_hat, runs[1][c].x0_hat);
    EXPECT_EQ(runs[0][c].x0_hat, runs[2][c].x0_hat);
    EXPECT_EQ(runs[0][c].n0_hat, runs[2][c].n0_hat);
  }
}

TEST(SamplePosterior, DiagnosticsAndTrajectories) {
  auto lg = LinearGaussian::make(4, 4, 9);
  auto cfg = base_config(Rule::PiGDM, 0.5, 1);
  cfg.record_trajectory = true;
  const auto run = sample_chain(lg.problem, lg.sx, lg.sn, cfg, 0);
  ASSERT_EQ(run.diagnostics.size(), 200u);
  EXPECT_EQ(run.diagnostics.front().step, 199);
  EXPECT_DOUBLE_EQ(run.diagnostics.front().t, 1.0);
  EXPECT_EQ(run.diagnostics.back().step, 0);
  EXPECT_EQ(run.x_trajectory.size(), 200u);
  EXPECT_EQ(run.x_trajectory.back(), run.x0_hat);
  for (const auto& d : run.diagnostics) EXPECT_TRUE(std::isfinite(d.residual_norm));
}

TEST(SamplePosterior, ResidualTrendDecreases) {
  auto lg = LinearGaussian::make(8, 8, 10);
  for (Rule rule : {Rule::PiGDM, Rule::DPS, Rule::Projection}) {
    const double lam = rule == Rule::DPS ? 0.2 : 0.5;
    const auto run = sample_chain(lg.problem, lg.sx, lg.sn, base_config(rule, lam, 1), 0);
    auto median = [](std::vector<double> v) {
      std::nth_element(v.begin(), v.begin() + v.size() / 2, v.end());
      return v[v.size() / 2];
    };
    std::vector<double> head, tail;
    const std::size_t k = run.diagnostics.size() / 10;
    for (std::size_t i = 0; i < k; ++i) {
      head.push_back(run.diagnostics[i].residual_norm);
      tail.push_back(run.diagnostics[run.diagnostics.size() - 1 - i].residual_norm);
    }
    EXPECT_LT(median(tail), median(head)) << rule_name(rule);
  }
}

TEST(SamplePosterior, DeltaNoisePriorRecoversSignal) {
  DiffusionSchedule s;
  Rng rng(11);
  AnalyticGaussianScore sx(Vector::Zero(4), Vector(Vector::Ones(4)), s);
  AnalyticGaussianScore delta(Vector::Zero(4), Vector(Vector::Zero(4)), s);
  const Vector x = sx.sample(rng);
  InverseProblem p = observe(x, LinearOperator::identity(4), Vector::Zero(4));
  auto cfg = base_config(Rule::PiGDM, 1.0, 4);
  cfg.steps = 600;
  for (const auto& run : sample_posterior(p, sx, delta, cfg)) {
    EXPECT_LT((run.x0_hat - x).norm(), 0.05 * std::max(1.0, x.norm()));
    EXPECT_LT(run.n0_hat.norm(), 0.05);
  }
}

TEST(SamplePosterior, GaussianOracleSmall) {
  auto lg = LinearGaussian::make(4, 4, 12);
  const auto post = gaussian_posterior(lg.problem.forward(), lg.problem.y, {lg.mx, lg.Sx}, {lg.mn, lg.Sn});
  auto cfg = base_config(Rule::DPS, 0.05, 400);
  cfg.steps = 600;
  const auto runs = sample_posterior(lg.problem, lg.sx, lg.sn, cfg);
  Vector mean = Vector::Zero(4);
  for (const auto& r : runs) mean += r.x0_hat;
  mean /= runs.size();
  EXPECT_LT((mean - post.mean).norm() / post.mean.norm(), 0.1);
}

TEST(SamplePosterior, OrderAndProjectionModesRun) {
  auto lg = LinearGaussian::make(4, 4, 13);
  auto cfg = base_config(Rule::Projection, 0.5, 1);
  cfg.order = StepOrder::UncondFirst;
  cfg.guidance.projection_noise = ProjectionNoise::Frozen;
  const auto run = sample_chain(lg.problem, lg.sx, lg.sn, cfg, 0);
  EXPECT_TRUE(run.x0_hat.allFinite());
  EXPECT_EQ(run.diagnostics.size(), 200u);
}

TEST(SamplePosterior, DivergenceKeepsDiagnosticsPrefix) {
  auto lg = LinearGaussian::make(4, 4, 14);
  auto cfg = base_config(Rule::Projection, 1e9, 1);
  try {
    sample_chain(lg.problem, lg.sx, lg.sn, cfg, 0);
    FAIL() << "expected a sampling error";
  } catch (const SamplingError& e) {
    const auto recorded = static_cast<int>(e.partial().diagnostics.size());
    EXPECT_GE(recorded, cfg.steps - 1 - e.step());
    EXPECT_LE(recorded, cfg.steps - e.step());
  }
}

TEST(SamplerConfig, Validation) {
  SamplerConfig c;
  c.steps = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c.steps = 10;
  c.chains = 0;
  EXPECT_THROW(c.validate(), ConfigError);
}
