#pragma once

#include "sndiff/linear_operator.hpp"
#include "sndiff/random.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sndiff {

/// y = a A x + b n.
///
/// The sampler works with the effective operator a A and the effective noise
/// b n, so a noise prior for a mixed problem describes b n.
struct InverseProblem {
  LinearOperator A = LinearOperator::identity(1);
  Vector y;
  std::optional<Vector> x_true;
  std::optional<Vector> n_true;  // raw noise n (before the b factor)
  double mix_a = 1.0;
  double mix_b = 1.0;
  nlohmann::json provenance = nlohmann::json::object();

  /// a A as a single operator.
  LinearOperator forward() const;
  /// b n for the stored truth, if present.
  std::optional<Vector> effective_noise() const;
};

InverseProblem observe(const Vector& x, const LinearOperator& A, const Vector& noise,
                       double mix_a = 1.0, double mix_b = 1.0);

enum class SineAxis { Column, Row };

SineAxis parse_sine_axis(const std::string& name);
std::string sine_axis_name(SineAxis axis);

/// Per-pixel standard deviations proportional to exp(sin(2 pi k / period)),
/// k the column (or row) index, rescaled so their mean is avg_std.
/// Row-major layout.
Vector sine_noise_std(int rows, int cols, double avg_std, double period = 16.0,
                      SineAxis axis = SineAxis::Column);
Vector gen_sine_noise(int rows, int cols, Rng& rng, double avg_std, double period = 16.0,
                      SineAxis axis = SineAxis::Column);

/// Binary glyph images (values in [0, 1]) of a fixed size, row-major.
struct SpriteLibrary {
  int rows = 16;
  int cols = 16;
  std::vector<Vector> glyphs;
};

/// Seven-segment digits 0-9 in one and two pixel stroke thickness.
SpriteLibrary procedural_digit_library(int rows = 16, int cols = 16);
/// Every .pgm file in `dir` (sorted by name); all must share one size.
SpriteLibrary load_sprite_library(const std::filesystem::path& dir);

/// One glyph, drawn uniformly from the library, cyclically shifted by up to
/// `max_shift` pixels along each axis and scaled by `weight`.
Vector gen_sprite_noise(int rows, int cols, const SpriteLibrary& library, Rng& rng, double weight,
                        int max_shift = 2);

/// Smooth images: 0.5 plus four random low-frequency cosines, clipped to [0, 1].
Vector gen_smooth_image(int rows, int cols, Rng& rng);

/// m x d matrix with i.i.d. N(0, 1/m) entries, m = round(d / factor).
LinearOperator make_cs_operator(Eigen::Index d, double factor, Rng& rng);

enum class DatasetFormat { Flat, PgmDir, Csv };

DatasetFormat parse_dataset_format(const std::string& name);

/// Loads row-major vectors in [0, 1]; out-of-range or malformed entries are
/// DataErrors carrying the file and record position. An empty PGM directory
/// yields an empty set and a warning on stderr.
std::vector<Vector> load_dataset(const std::filesystem::path& path, DatasetFormat format);

struct PgmImage {
  int rows = 0;
  int cols = 0;
  Vector pixels;  // row-major, scaled to [0, 1]
};

PgmImage read_pgm(const std::filesystem::path& path);
/// Writes an 8-bit P5 image; values are clipped to [0, 1].
void write_pgm(const std::filesystem::path& path, int rows, int cols, const Vector& pixels);

}  // namespace sndiff
