#pragma once

#include "sndiff/common.hpp"

#include <json.hpp>

#include <filesystem>
#include <vector>

namespace sndiff {

/// Flat binary container used for model parameters, datasets and estimate
/// arrays:
///
///   bytes 0..7   magic "SNDIFF01"
///   bytes 8..15  uint64 little-endian length N of the JSON header
///   next N bytes UTF-8 JSON header (must contain "count")
///   remainder    `count` IEEE-754 float64 values, little-endian
struct FlatFile {
  nlohmann::json header;
  std::vector<double> data;
};

void write_flat(const std::filesystem::path& path, nlohmann::json header,
                const std::vector<double>& data);
FlatFile read_flat(const std::filesystem::path& path);

/// Convenience wrappers for a rows x cols row-major array.
void write_array(const std::filesystem::path& path, const std::vector<Vector>& rows,
                 nlohmann::json extra = nlohmann::json::object());
void write_vector(const std::filesystem::path& path, const Vector& v,
                  nlohmann::json extra = nlohmann::json::object());
std::vector<Vector> read_array(const std::filesystem::path& path);
Vector read_vector(const std::filesystem::path& path);

}  // namespace sndiff
