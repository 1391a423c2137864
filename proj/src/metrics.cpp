#include "sndiff/metrics.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <limits>

namespace sndiff {

double psnr(const Vector& ref, const Vector& test, double peak) {
  require_same_size(ref, test, "psnr");
  if (ref.size() == 0) throw ShapeError("psnr: empty image");
  if (!(peak > 0.0)) throw DomainError("psnr: peak must be > 0");
  const double mse = (ref - test).squaredNorm() / static_cast<double>(ref.size());
  if (mse == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

double ssim(const Vector& ref, const Vector& test, int rows, int cols, const SsimOptions& options) {
  require_same_size(ref, test, "ssim");
  if (ref.size() != static_cast<Eigen::Index>(rows) * cols) throw ShapeError("ssim: size does not match rows x cols");
  const int w = options.window;
  if (w < 2) throw ConfigError("ssim: window must be >= 2");
  if (rows < w || cols < w) {
    throw ShapeError("ssim: image " + std::to_string(rows) + "x" + std::to_string(cols) +
                     " is smaller than the " + std::to_string(w) + "x" + std::to_string(w) + " window");
  }
  const double c1 = std::pow(options.k1 * options.dynamic_range, 2);
  const double c2 = std::pow(options.k2 * options.dynamic_range, 2);
  const double n = static_cast<double>(w) * w;
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> a(ref.data(), rows, cols);
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>> b(test.data(), rows, cols);
  double total = 0.0;
  int count = 0;
  for (int r = 0; r + w <= rows; ++r) {
    for (int c = 0; c + w <= cols; ++c) {
      const auto pa = a.block(r, c, w, w).array();
      const auto pb = b.block(r, c, w, w).array();
      const double ma = pa.mean();
      const double mb = pb.mean();
      const double va = (pa - ma).square().sum() / (n - 1.0);
      const double vb = (pb - mb).square().sum() / (n - 1.0);
      const double cov = ((pa - ma) * (pb - mb)).sum() / (n - 1.0);
      total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
      ++count;
    }
  }
  return total / count;
}

MetricSummary summarize(const std::vector<double>& values) {
  std::vector<double> v;
  for (double x : values) if (std::isfinite(x)) v.push_back(x);
  MetricSummary s;
  if (v.empty()) {
    s.mean = s.std = s.median = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / v.size();
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.std = v.size() > 1 ? std::sqrt(ss / (v.size() - 1)) : 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  s.median = v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
  return s;
}

void MetricReport::add(std::string id, double psnr_value, double ssim_value) {
  rows.push_back({std::move(id), psnr_value, ssim_value});
}

MetricSummary MetricReport::psnr_summary() const {
  std::vector<double> v;
  for (const auto& r : rows) v.push_back(r.psnr);
  return summarize(v);
}

MetricSummary MetricReport::ssim_summary() const {
  std::vector<double> v;
  for (const auto& r : rows) v.push_back(r.ssim);
  return summarize(v);
}

void MetricReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "id,psnr,ssim\n" << std::setprecision(10);
  for (const auto& r : rows) {
    out << r.id << ",";
    if (std::isinf(r.psnr)) out << "inf"; else out << r.psnr;
    out << "," << r.ssim << "\n";
  }
}

}  // namespace sndiff
