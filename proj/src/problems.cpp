#include "sndiff/problems.hpp"

#include "sndiff/binary_io.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>

namespace sndiff {

LinearOperator InverseProblem::forward() const {
  if (mix_a == 1.0) return A;
  switch (A.kind()) {
    case LinearOperator::Kind::Identity:
    case LinearOperator::Kind::ScaledIdentity:
      return LinearOperator::scaled_identity(A.rows(), mix_a * A.scale());
    case LinearOperator::Kind::Dense:
      return LinearOperator::dense(mix_a * A.to_dense());
    case LinearOperator::Kind::RandomGaussian:
      return LinearOperator::random_gaussian(mix_a * A.to_dense());
  }
  return A;
}

std::optional<Vector> InverseProblem::effective_noise() const {
  if (!n_true) return std::nullopt;
  return Vector(mix_b * *n_true);
}

InverseProblem observe(const Vector& x, const LinearOperator& A, const Vector& noise, double mix_a,
                       double mix_b) {
  if (x.size() != A.cols()) throw ShapeError("observe: x does not match the columns of A");
  if (noise.size() != A.rows()) throw ShapeError("observe: noise does not match the rows of A");
  if (!std::isfinite(mix_a) || !std::isfinite(mix_b)) throw ConfigError("observe: non-finite mixing weights");
  InverseProblem p;
  p.A = A;
  p.y = mix_a * A.apply(x) + mix_b * noise;
  p.x_true = x;
  p.n_true = noise;
  p.mix_a = mix_a;
  p.mix_b = mix_b;
  p.provenance = {{"operator", kind_name(A.kind())}, {"mix", {mix_a, mix_b}}};
  return p;
}

SineAxis parse_sine_axis(const std::string& name) {
  if (name == "column") return SineAxis::Column;
  if (name == "row") return SineAxis::Row;
  throw ConfigError("unknown sine axis '" + name + "' (expected column or row)");
}

std::string sine_axis_name(SineAxis axis) { return axis == SineAxis::Column ? "column" : "row"; }

Vector sine_noise_std(int rows, int cols, double avg_std, double period, SineAxis axis) {
  if (rows < 1 || cols < 1) throw ShapeError("sine noise: empty shape");
  if (!(avg_std >= 0.0)) throw ConfigError("sine noise: avg_std must be >= 0");
  if (!(period > 0.0)) throw ConfigError("sine noise: period must be > 0");
  Vector s(static_cast<Eigen::Index>(rows) * cols);
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int k = axis == SineAxis::Column ? c : r;
      s[static_cast<Eigen::Index>(r) * cols + c] = std::exp(std::sin(2.0 * std::numbers::pi * k / period));
    }
  }
  return s * (avg_std / s.mean());
}

Vector gen_sine_noise(int rows, int cols, Rng& rng, double avg_std, double period, SineAxis axis) {
  const Vector s = sine_noise_std(rows, cols, avg_std, period, axis);
  if (avg_std == 0.0) return Vector::Zero(s.size());
  return s.cwiseProduct(standard_normal(s.size(), rng));
}

namespace {

struct Segment {
  int r0, c0, r1, c1;
};

// Segment end points on a 16 x 16 canvas.
constexpr Segment kSegments[7] = {
    {2, 3, 2, 12},    // a
    {2, 12, 8, 12},   // b
    {8, 12, 14, 12},  // c
    {14, 3, 14, 12},  // d
    {8, 3, 14, 3},    // e
    {2, 3, 8, 3},     // f
    {8, 3, 8, 12},    // g
};

constexpr const char* kDigits[10] = {"abcdef", "bc",     "abged", "abgcd",   "fgbc",
                                     "afgcd",  "afgedc", "abc",   "abcdefg", "abcfgd"};

int scaled(int v, int size) { return static_cast<int>(std::lround(v * (size - 1) / 15.0)); }

}  // namespace

SpriteLibrary procedural_digit_library(int rows, int cols) {
  if (rows < 8 || cols < 8) throw ConfigError("sprite library: glyphs need at least 8 x 8 pixels");
  SpriteLibrary lib;
  lib.rows = rows;
  lib.cols = cols;
  for (int thickness = 1; thickness <= 2; ++thickness) {
    for (const char* digit : kDigits) {
      Vector img = Vector::Zero(static_cast<Eigen::Index>(rows) * cols);
      for (const char* s = digit; *s; ++s) {
        const Segment seg = kSegments[*s - 'a'];
        const int r0 = scaled(seg.r0, rows), r1 = scaled(seg.r1, rows);
        const int c0 = scaled(seg.c0, cols), c1 = scaled(seg.c1, cols);
        for (int k = 0; k < thickness; ++k) {
          const int off = k - thickness / 2;
          if (r0 == r1) {
            const int r = r0 + off;
            for (int c = c0; c <= c1; ++c) img[static_cast<Eigen::Index>(r) * cols + c] = 1.0;
          } else {
            const int c = c0 + off;
            for (int r = r0; r <= r1; ++r) img[static_cast<Eigen::Index>(r) * cols + c] = 1.0;
          }
        }
      }
      lib.glyphs.push_back(std::move(img));
    }
  }
  return lib;
}

SpriteLibrary load_sprite_library(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".pgm") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  SpriteLibrary lib;
  lib.rows = 0;
  lib.cols = 0;
  for (const auto& f : files) {
    PgmImage img = read_pgm(f);
    if (lib.glyphs.empty()) {
      lib.rows = img.rows;
      lib.cols = img.cols;
    } else if (img.rows != lib.rows || img.cols != lib.cols) {
      throw DataError(f.string() + ": glyph size differs from the first glyph");
    }
    lib.glyphs.push_back(std::move(img.pixels));
  }
  return lib;
}

Vector gen_sprite_noise(int rows, int cols, const SpriteLibrary& library, Rng& rng, double weight,
                        int max_shift) {
  if (library.glyphs.empty()) throw ConfigError("sprite noise: empty sprite library");
  if (library.rows != rows || library.cols != cols) {
    throw ShapeError("sprite noise: library glyphs are " + std::to_string(library.rows) + "x" +
                     std::to_string(library.cols) + ", requested " + std::to_string(rows) + "x" +
                     std::to_string(cols));
  }
  if (!(weight >= 0.0)) throw ConfigError("sprite noise: weight must be >= 0");
  if (max_shift < 0) throw ConfigError("sprite noise: max_shift must be >= 0");
  std::uniform_int_distribution<std::size_t> pick(0, library.glyphs.size() - 1);
  std::uniform_int_distribution<int> shift(-max_shift, max_shift);
  const Vector& glyph = library.glyphs[pick(rng)];
  const int dr = shift(rng);
  const int dc = shift(rng);
  Vector out(glyph.size());
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      const int rr = ((r + dr) % rows + rows) % rows;
      const int cc = ((c + dc) % cols + cols) % cols;
      out[static_cast<Eigen::Index>(rr) * cols + cc] = weight * glyph[static_cast<Eigen::Index>(r) * cols + c];
    }
  }
  return out;
}

Vector gen_smooth_image(int rows, int cols, Rng& rng) {
  if (rows < 1 || cols < 1) throw ShapeError("smooth image: empty shape");
  std::uniform_int_distribution<int> freq(0, 2);
  Vector img = Vector::Constant(static_cast<Eigen::Index>(rows) * cols, 0.5);
  for (int term = 0; term < 4; ++term) {
    const int kx = freq(rng);
    const int ky = freq(rng);
    const double phase = uniform(0.0, 2.0 * std::numbers::pi, rng);
    const double amp = uniform(0.0, 0.15, rng);
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        const double u = static_cast<double>(c) / cols;
        const double v = static_cast<double>(r) / rows;
        img[static_cast<Eigen::Index>(r) * cols + c] += amp * std::cos(std::numbers::pi * (kx * u + ky * v) + phase);
      }
    }
  }
  return img.cwiseMax(0.0).cwiseMin(1.0);
}

LinearOperator make_cs_operator(Eigen::Index d, double factor, Rng& rng) {
  if (d < 1) throw ConfigError("cs operator: d must be >= 1");
  if (!(factor >= 1.0) || !std::isfinite(factor)) throw ConfigError("cs operator: factor must be >= 1");
  const auto m = static_cast<Eigen::Index>(std::llround(static_cast<double>(d) / factor));
  if (m < 1) throw ConfigError("cs operator: m = round(d / factor) must be >= 1");
  std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(static_cast<double>(m)));
  Matrix a(m, d);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < d; ++j) a(i, j) = normal(rng);
  return LinearOperator::random_gaussian(std::move(a));
}

DatasetFormat parse_dataset_format(const std::string& name) {
  if (name == "flat") return DatasetFormat::Flat;
  if (name == "pgm") return DatasetFormat::PgmDir;
  if (name == "csv") return DatasetFormat::Csv;
  throw ConfigError("unknown dataset format '" + name + "' (expected flat, pgm or csv)");
}

namespace {

void check_range(const Vector& v, const std::string& where) {
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (!(v[i] >= 0.0 && v[i] <= 1.0)) {
      throw DataError(where + ", entry " + std::to_string(i) + ": value " + std::to_string(v[i]) +
                      " outside [0, 1]");
    }
  }
}

std::vector<Vector> load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::vector<Vector> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> values;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(cell, &used));
        while (used < cell.size() && std::isspace(static_cast<unsigned char>(cell[used]))) ++used;
        if (used != cell.size()) throw std::invalid_argument(cell);
      } catch (const std::exception&) {
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": cannot parse '" + cell + "'");
      }
    }
    Vector v = Eigen::Map<Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
    if (!out.empty() && v.size() != out.front().size()) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected " +
                      std::to_string(out.front().size()) + " values");
    }
    check_range(v, path.string() + ":" + std::to_string(line_no));
    out.push_back(std::move(v));
  }
  return out;
}

}  // namespace

std::vector<Vector> load_dataset(const std::filesystem::path& path, DatasetFormat format) {
  switch (format) {
    case DatasetFormat::Flat: {
      auto rows = read_array(path);
      for (std::size_t i = 0; i < rows.size(); ++i) check_range(rows[i], path.string() + ", record " + std::to_string(i));
      return rows;
    }
    case DatasetFormat::Csv:
      return load_csv(path);
    case DatasetFormat::PgmDir: {
      if (!std::filesystem::is_directory(path)) throw DataError("not a directory: " + path.string());
      std::vector<std::filesystem::path> files;
      for (const auto& e : std::filesystem::directory_iterator(path)) {
        if (e.is_regular_file() && e.path().extension() == ".pgm") files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
      if (files.empty()) {
        std::cerr << "warning: no .pgm files in " << path.string() << "\n";
        return {};
      }
      std::vector<Vector> out;
      int rows = 0, cols = 0;
      for (const auto& f : files) {
        PgmImage img = read_pgm(f);
        if (out.empty()) {
          rows = img.rows;
          cols = img.cols;
        } else if (img.rows != rows || img.cols != cols) {
          throw DataError(f.string() + ": size " + std::to_string(img.rows) + "x" + std::to_string(img.cols) +
                          " differs from " + std::to_string(rows) + "x" + std::to_string(cols));
        }
        out.push_back(std::move(img.pixels));
      }
      return out;
    }
  }
  return {};
}

PgmImage read_pgm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  auto token = [&]() -> std::string {
    std::string tok;
    char ch;
    while (in.get(ch)) {
      if (ch == '#') {
        std::string rest;
        std::getline(in, rest);
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(ch))) {
        if (!tok.empty()) return tok;
        continue;
      }
      tok.push_back(ch);
    }
    return tok;
  };
  if (token() != "P5") throw DataError(path.string() + ": not a binary PGM (P5) file");
  PgmImage img;
  int maxval = 0;
  try {
    img.cols = std::stoi(token());
    img.rows = std::stoi(token());
    maxval = std::stoi(token());
  } catch (const std::exception&) {
    throw DataError(path.string() + ": malformed PGM header");
  }
  if (img.rows < 1 || img.cols < 1 || maxval < 1 || maxval > 65535) {
    throw DataError(path.string() + ": invalid PGM dimensions or maxval");
  }
  const std::size_t n = static_cast<std::size_t>(img.rows) * img.cols;
  const std::size_t bytes_per = maxval > 255 ? 2 : 1;
  std::vector<unsigned char> raw(n * bytes_per);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size()) {
    throw DataError(path.string() + ": truncated pixel data at byte " + std::to_string(in.gcount()));
  }
  img.pixels.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned v = bytes_per == 1 ? raw[i] : (static_cast<unsigned>(raw[2 * i]) << 8) | raw[2 * i + 1];
    if (v > static_cast<unsigned>(maxval)) {
      throw DataError(path.string() + ", pixel " + std::to_string(i) + ": value exceeds maxval");
    }
    img.pixels[static_cast<Eigen::Index>(i)] = static_cast<double>(v) / maxval;
  }
  return img;
}

void write_pgm(const std::filesystem::path& path, int rows, int cols, const Vector& pixels) {
  if (pixels.size() != static_cast<Eigen::Index>(rows) * cols) throw ShapeError("write_pgm: size mismatch");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << "P5\n" << cols << " " << rows << "\n255\n";
  for (Eigen::Index i = 0; i < pixels.size(); ++i) {
    const double v = std::isfinite(pixels[i]) ? std::clamp(pixels[i], 0.0, 1.0) : 0.0;
    out.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
  }
  if (!out) throw DataError("write failed: " + path.string());
}

}  // namespace sndiff
