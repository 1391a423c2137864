#pragma once

#include "sndiff/common.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace sndiff {

/// 10 log10(peak^2 / MSE); +infinity when the images are identical.
double psnr(const Vector& ref, const Vector& test, double peak = 1.0);

struct SsimOptions {
  int window = 7;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
};

/// Mean SSIM over all fully contained window positions (uniform window,
/// sample covariances). Images are row-major rows x cols.
double ssim(const Vector& ref, const Vector& test, int rows, int cols, const SsimOptions& options = {});

struct MetricRow {
  std::string id;
  double psnr = 0.0;
  double ssim = 0.0;
};

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;
  double median = 0.0;
};

/// Summary over finite values only.
MetricSummary summarize(const std::vector<double>& values);

struct MetricReport {
  std::vector<MetricRow> rows;
  SsimOptions ssim_options;

  void add(std::string id, double psnr_value, double ssim_value);
  MetricSummary psnr_summary() const;
  MetricSummary ssim_summary() const;
  /// "id,psnr,ssim" header followed by one row per sample; +inf is written
  /// as "inf".
  void write_csv(const std::filesystem::path& path) const;
};

}  // namespace sndiff
