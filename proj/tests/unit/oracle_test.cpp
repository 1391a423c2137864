#include "sndiff/oracle.hpp"
#include "sndiff/score.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

using namespace sndiff;

namespace {

double log_gauss(const Vector& x, const Vector& mean, const Matrix& cov) {
  const Eigen::LLT<Matrix> llt(cov);
  const Vector r = x - mean;
  const Matrix L = llt.matrixL();
  return -0.5 * r.dot(llt.solve(r)) - L.diagonal().array().log().sum() -
         0.5 * x.size() * std::log(2.0 * 3.14159265358979323846);
}

}  // namespace

TEST(GaussianPosterior, ScalarConjugateCase) {
  const auto post = gaussian_posterior(LinearOperator::identity(1), Vector::Constant(1, 2.0),
                                       {Vector::Zero(1), Matrix::Identity(1, 1)},
                                       {Vector::Zero(1), Matrix::Identity(1, 1)});
  EXPECT_NEAR(post.mean[0], 1.0, 1e-14);
  EXPECT_NEAR(post.covariance(0, 0), 0.5, 1e-14);
}

TEST(GaussianPosterior, WeakLikelihoodApproachesPrior) {
  Rng rng(1);
  const Matrix Sx = sndiff::testing::random_spd(3, rng);
  const Vector mx = standard_normal(3, rng);
  const auto post = gaussian_posterior(LinearOperator::identity(3), Vector::Constant(3, 5.0), {mx, Sx},
                                       {Vector::Zero(3), 1e6 * Matrix::Identity(3, 3)});
  EXPECT_LT((post.mean - mx).norm(), 1e-4);
  EXPECT_LT((post.covariance - Sx).norm(), 1e-4);
}

TEST(GaussianPosterior, SingularCovarianceThrows) {
  EXPECT_THROW(gaussian_posterior(LinearOperator::identity(2), Vector::Zero(2), {Vector::Zero(2), Matrix::Zero(2, 2)},
                                  {Vector::Zero(2), Matrix::Identity(2, 2)}),
               NumericError);
}

TEST(GaussianPosterior, MatchesImportanceSampling) {
  Rng rng(2);
  Matrix a(4, 6);
  for (int i = 0; i < 4; ++i) a.row(i) = standard_normal(6, rng).transpose() * 0.5;
  const Matrix Sx = sndiff::testing::random_spd(6, rng, 0.5);
  const Matrix Sn = sndiff::testing::random_spd(4, rng, 0.5);
  const Vector mx = standard_normal(6, rng), mn = Vector::Zero(4);
  const auto A = LinearOperator::dense(a);
  AnalyticGaussianScore px(mx, Sx, DiffusionSchedule()), pn(mn, Sn, DiffusionSchedule());
  const Vector y = A.apply(px.sample(rng)) + pn.sample(rng);
  const auto post = gaussian_posterior(A, y, {mx, Sx}, {mn, Sn});

  // self-normalised importance sampling with the prior as proposal
  const int n = 1000000;
  std::vector<Vector> xs;
  std::vector<double> logw;
  xs.reserve(n);
  logw.reserve(n);
  double top = -1e300;
  for (int k = 0; k < n; ++k) {
    Vector x = px.sample(rng);
    logw.push_back(log_gauss(y - A.apply(x), mn, Sn));
    top = std::max(top, logw.back());
    xs.push_back(std::move(x));
  }
  double wsum = 0.0, w2 = 0.0;
  Vector mean = Vector::Zero(6);
  for (int k = 0; k < n; ++k) {
    const double w = std::exp(logw[k] - top);
    wsum += w;
    w2 += w * w;
    mean += w * xs[k];
  }
  mean /= wsum;
  Matrix cov = Matrix::Zero(6, 6);
  for (int k = 0; k < n; ++k) cov += std::exp(logw[k] - top) * (xs[k] - mean) * (xs[k] - mean).transpose();
  cov /= wsum;
  const double ess = wsum * wsum / w2;
  for (int i = 0; i < 6; ++i) {
    const double se = std::sqrt(post.covariance(i, i) / ess);
    EXPECT_NEAR(mean[i], post.mean[i], 3.0 * se) << i;
    EXPECT_NEAR(cov(i, i), post.covariance(i, i), 3.0 * post.covariance(i, i) * std::sqrt(2.0 / ess)) << i;
  }
}

TEST(GridPosterior, GaussianCaseMatchesClosedForm) {
  const auto A = LinearOperator::identity(1);
  const Vector y = Vector::Constant(1, 1.3);
  auto lpx = [](const Vector& x) { return -0.5 * (x[0] - 0.5) * (x[0] - 0.5) / 0.8; };
  auto lpn = [](const Vector& n) { return -0.5 * n[0] * n[0] / 0.3; };
  GridSpec g{Vector::Constant(1, -4.0), Vector::Constant(1, 5.0), {901}};
  const auto grid = grid_posterior(A, y, lpx, lpn, g);
  const auto post = gaussian_posterior(A, y, {Vector::Constant(1, 0.5), Matrix::Constant(1, 1, 0.8)},
                                       {Vector::Zero(1), Matrix::Constant(1, 1, 0.3)});
  EXPECT_LT(std::abs(grid.mean()[0] - post.mean[0]), 0.01);
  double total = 0.0;
  for (double p : grid.probs) total += p;
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(GridPosterior, TwoDimensionalGaussian) {
  Matrix a(1, 2);
  a << 1.0, 0.5;
  const auto A = LinearOperator::dense(a);
  const Vector y = Vector::Constant(1, 0.7);
  auto lpx = [](const Vector& x) { return -0.5 * x.squaredNorm(); };
  auto lpn = [](const Vector& n) { return -0.5 * n[0] * n[0] / 0.2; };
  GridSpec g{Vector::Constant(2, -4.0), Vector::Constant(2, 4.0), {161, 161}};
  const auto grid = grid_posterior(A, y, lpx, lpn, g);
  const auto post = gaussian_posterior(A, y, {Vector::Zero(2), Matrix::Identity(2, 2)},
                                       {Vector::Zero(1), Matrix::Constant(1, 1, 0.2)});
  EXPECT_LT((grid.mean() - post.mean).cwiseAbs().maxCoeff(), 0.05);
}

TEST(GridPosterior, SymmetricBimodal) {
  DiffusionSchedule s;
  Vector w(2);
  w << 0.5, 0.5;
  GaussianMixtureScore prior(w, {Vector::Constant(1, -1.5), Vector::Constant(1, 1.5)},
                             {Vector::Constant(1, 0.3), Vector::Constant(1, 0.3)}, s);
  auto lpx = [&](const Vector& x) { return prior.log_density(x, 0.0); };
  auto lpn = [](const Vector& n) { return -0.5 * n[0] * n[0]; };
  GridSpec g{Vector::Constant(1, -5.0), Vector::Constant(1, 5.0), {401}};
  const auto grid = grid_posterior(LinearOperator::identity(1), Vector::Zero(1), lpx, lpn, g);
  double asym = 0.0;
  for (std::size_t k = 0; k < grid.probs.size(); ++k)
    asym = std::max(asym, std::abs(grid.probs[k] - grid.probs[grid.probs.size() - 1 - k]));
  EXPECT_LT(asym, 1e-10);
}

TEST(GridPosterior, ExtremeLogDensitiesNormalise) {
  auto lpx = [](const Vector& x) { return -1e4 - x[0] * x[0]; };
  auto lpn = [](const Vector& n) { return -1e4 - n[0] * n[0]; };
  GridSpec g{Vector::Constant(1, -3.0), Vector::Constant(1, 3.0), {101}};
  const auto grid = grid_posterior(LinearOperator::identity(1), Vector::Zero(1), lpx, lpn, g);
  double total = 0.0;
  for (double p : grid.probs) total += p;
  EXPECT_NEAR(total, 1.0, 1e-12);
  auto dead = [](const Vector&) { return -std::numeric_limits<double>::infinity(); };
  EXPECT_THROW(grid_posterior(LinearOperator::identity(1), Vector::Zero(1), dead, lpn, g), NumericError);
  EXPECT_THROW(grid_posterior(LinearOperator::identity(3), Vector::Zero(3), lpx, lpn, g), DomainError);
}

TEST(MapEstimate, GaussianMapEqualsMean) {
  Rng rng(3);
  const Matrix Sx = sndiff::testing::random_spd(3, rng, 0.5);
  const Vector mx = standard_normal(3, rng);
  const Matrix Sn = 0.5 * Matrix::Identity(3, 3);
  const Matrix Px = Sx.inverse();
  const auto A = LinearOperator::identity(3);
  const Vector y = standard_normal(3, rng);
  const auto post = gaussian_posterior(A, y, {mx, Sx}, {Vector::Zero(3), Sn});
  auto lpx = [&](const Vector& x) { return -0.5 * (x - mx).dot(Px * (x - mx)); };
  auto gpx = [&](const Vector& x) -> Vector { return -Px * (x - mx); };
  auto lpn = [](const Vector& n) { return -n.squaredNorm(); };
  auto gpn = [](const Vector& n) -> Vector { return -2.0 * n; };
  const auto res = map_estimate(A, y, lpx, gpx, lpn, gpn, Vector::Zero(3), 5000, 0.1);
  EXPECT_LT((res.x - post.mean).norm(), 1e-6);
  EXPECT_EQ(res.trace.size(), 5001u);
}

TEST(MapEstimate, ZeroStepsReturnsInit) {
  auto lp = [](const Vector& x) { return -x.squaredNorm(); };
  auto gp = [](const Vector& x) -> Vector { return -2.0 * x; };
  const Vector init = Vector::Constant(2, 3.0);
  EXPECT_EQ(map_estimate(LinearOperator::identity(2), Vector::Zero(2), lp, gp, lp, gp, init, 0, 0.1).x, init);
}

TEST(MapEstimate, BimodalPriorFindsBothModes) {
  DiffusionSchedule s;
  Vector w(2);
  w << 0.5, 0.5;
  GaussianMixtureScore prior(w, {Vector::Constant(1, -1.5), Vector::Constant(1, 1.5)},
                             {Vector::Constant(1, 0.2), Vector::Constant(1, 0.2)}, s);
  auto lpx = [&](const Vector& x) { return prior.log_density(x, 0.0); };
  auto gpx = [&](const Vector& x) { return score_at(prior, x, 0.0, 1e-12); };
  auto lpn = [](const Vector& n) { return -0.5 * n[0] * n[0]; };
  auto gpn = [](const Vector& n) -> Vector { return -n; };
  const Vector y = Vector::Constant(1, 0.2);
  const auto A = LinearOperator::identity(1);
  GridSpec g{Vector::Constant(1, -4.0), Vector::Constant(1, 4.0), {801}};
  const auto grid = grid_posterior(A, y, lpx, lpn, g);
  const double h = 8.0 / 800;
  // local maxima of the grid posterior
  std::vector<double> modes;
  for (std::size_t k = 1; k + 1 < grid.probs.size(); ++k)
    if (grid.probs[k] > grid.probs[k - 1] && grid.probs[k] > grid.probs[k + 1]) modes.push_back(grid.nodes[k][0]);
  ASSERT_EQ(modes.size(), 2u);
  const auto left = map_estimate(A, y, lpx, gpx, lpn, gpn, Vector::Constant(1, -3.0), 4000, 0.02);
  const auto right = map_estimate(A, y, lpx, gpx, lpn, gpn, Vector::Constant(1, 3.0), 4000, 0.02);
  EXPECT_NEAR(left.x[0], modes[0], h);
  EXPECT_NEAR(right.x[0], modes[1], h);
}

TEST(MapEstimate, DivergenceCarriesTrace) {
  auto lp = [](const Vector& x) { return -x.squaredNorm(); };
  auto gp = [](const Vector& x) -> Vector { return -2.0 * x; };
  try {
    map_estimate(LinearOperator::identity(1), Vector::Zero(1), lp, gp, lp, gp, Vector::Ones(1), 10000, 10.0);
    FAIL();
  } catch (const MapDivergence& e) {
    EXPECT_GT(e.trace().size(), 1u);
  }
}
