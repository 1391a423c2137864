#include "sndiff/binary_io.hpp"

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

namespace sndiff {

namespace {

constexpr std::array<char, 8> kMagic = {'S', 'N', 'D', 'I', 'F', 'F', '0', '1'};

template <typename T>
T to_little(T value) {
  if constexpr (std::endian::native == std::endian::little) {
    return value;
  } else {
    std::array<unsigned char, sizeof(T)> bytes;
    std::memcpy(bytes.data(), &value, sizeof(T));
    std::reverse(bytes.begin(), bytes.end());
    std::memcpy(&value, bytes.data(), sizeof(T));
    return value;
  }
}

}  // namespace

void write_flat(const std::filesystem::path& path, nlohmann::json header,
                const std::vector<double>& data) {
  header["count"] = data.size();
  header["dtype"] = "float64-le";
  const std::string text = header.dump();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out.write(kMagic.data(), kMagic.size());
  const std::uint64_t len = to_little<std::uint64_t>(text.size());
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  for (double v : data) {
    const std::uint64_t bits = to_little(std::bit_cast<std::uint64_t>(v));
    out.write(reinterpret_cast<const char*>(&bits), sizeof(bits));
  }
  if (!out) throw DataError("write to '" + path.string() + "' failed");
}

FlatFile read_flat(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw DataError(path.string() + ": bad magic (offset 0)");
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  len = to_little(len);
  if (!in || len > (1u << 26)) throw DataError(path.string() + ": bad header length (offset 8)");
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw DataError(path.string() + ": truncated header (offset 16)");
  FlatFile file;
  try {
    file.header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": malformed JSON header: " + e.what());
  }
  if (!file.header.contains("count")) throw DataError(path.string() + ": header lacks 'count'");
  const auto count = file.header.at("count").get<std::uint64_t>();
  file.data.resize(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    std::uint64_t bits = 0;
    in.read(reinterpret_cast<char*>(&bits), sizeof(bits));
    if (!in) {
      throw DataError(path.string() + ": truncated payload at value " + std::to_string(i));
    }
    file.data[i] = std::bit_cast<double>(to_little(bits));
  }
  return file;
}

void write_array(const std::filesystem::path& path, const std::vector<Vector>& rows,
                 nlohmann::json extra) {
  const std::size_t cols = rows.empty() ? 0 : static_cast<std::size_t>(rows.front().size());
  std::vector<double> data;
  data.reserve(rows.size() * cols);
  for (const auto& r : rows) {
    if (static_cast<std::size_t>(r.size()) != cols) throw ShapeError("write_array: ragged rows");
    data.insert(data.end(), r.data(), r.data() + r.size());
  }
  extra["shape"] = {rows.size(), cols};
  write_flat(path, std::move(extra), data);
}

void write_vector(const std::filesystem::path& path, const Vector& v, nlohmann::json extra) {
  extra["shape"] = {v.size()};
  write_flat(path, std::move(extra), std::vector<double>(v.data(), v.data() + v.size()));
}

std::vector<Vector> read_array(const std::filesystem::path& path) {
  const FlatFile f = read_flat(path);
  const auto shape = f.header.value("shape", std::vector<std::size_t>{});
  std::size_t rows = 1, cols = f.data.size();
  if (shape.size() == 2) {
    rows = shape[0];
    cols = shape[1];
  } else if (shape.size() != 1) {
    throw DataError(path.string() + ": header 'shape' must have 1 or 2 entries");
  }
  if (rows * cols != f.data.size()) throw DataError(path.string() + ": shape/count mismatch");
  std::vector<Vector> out(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    out[r] = Eigen::Map<const Vector>(f.data.data() + r * cols, static_cast<Eigen::Index>(cols));
  }
  return out;
}

Vector read_vector(const std::filesystem::path& path) {
  const FlatFile f = read_flat(path);
  return Eigen::Map<const Vector>(f.data.data(), static_cast<Eigen::Index>(f.data.size()));
}

}  // namespace sndiff
