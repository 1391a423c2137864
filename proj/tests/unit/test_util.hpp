#pragma once

#include "sndiff/score.hpp"

#include <algorithm>
#include <filesystem>
#include <functional>
#include <random>
#include <string>

namespace sndiff::testing {

/// Central-difference gradient of a scalar function.
inline Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double h) {
  Vector g(x.size());
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    Vector xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    g[j] = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

/// v^T (d score / d x) by central differences of <v, score(x, t)>.
inline Vector fd_vjp(const ScoreFunction& s, const Vector& x, double t, const Vector& v, double h) {
  return fd_gradient([&](const Vector& p) { return v.dot(s.score(p, t)); }, x, h);
}

inline double rel_err(const Vector& a, const Vector& b) {
  return (a - b).norm() / std::max(b.norm(), 1e-12);
}

inline Matrix random_spd(Eigen::Index n, Rng& rng, double ridge = 0.2) {
  Matrix b(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) b(i, j) = std::normal_distribution<double>(0.0, 1.0)(rng);
  Matrix c = b * b.transpose() / static_cast<double>(n);
  c.diagonal().array() += ridge;
  return c;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("sndiff_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace sndiff::testing
