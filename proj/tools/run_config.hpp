#pragma once

#include "sndiff/guidance.hpp"
#include "sndiff/problems.hpp"
#include "sndiff/sampler.hpp"
#include "sndiff/score.hpp"
#include "sndiff/training.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sndiff::app {

using nlohmann::json;

/// Source of a set of vectors: a file on disk or one of the generators.
struct DatasetSpec {
  std::string source = "file";  // file | smooth_images | sprites | sine_noise | prior
  std::filesystem::path path;
  std::string format = "flat";
  int count = 1000;
  int rows = 16;
  int cols = 16;
  double weight = 1.0;
  int max_shift = 2;
  std::filesystem::path sprite_dir;
  double avg_std = 0.2;
  double period = 16.0;
  std::string axis = "column";
  double scale = 1.0;
  std::uint64_t seed = 0;
  json prior;  // for source == "prior"
};

struct PriorSpec {
  std::string kind;  // gaussian | delta | sine | gaussian_fit | mixture | mlp
  json raw;          // resolved JSON of this prior
};

/// An instantiated prior: the score plus, for Gaussian families, the
/// moments used by the oracle.
struct Prior {
  ScorePtr score;
  std::optional<Vector> mean;
  std::optional<Matrix> covariance;
  bool samplable = false;
  std::function<Vector(Rng&)> sample;
};

struct ProblemSpec {
  int count = 1;
  std::optional<std::pair<int, int>> image_shape;
  json op;
  json signal;
  json noise;
  double mix_a = 1.0;
  double mix_b = 1.0;
  std::optional<Vector> y;
};

struct BenchSpec {
  std::vector<std::string> rules = {"pigdm", "dps", "projection"};
  std::vector<int> steps = {600};
  std::vector<int> dims = {256};
  int repeats = 5;
};

struct TrainSpec {
  std::string target = "signal";
  DatasetSpec dataset;
  std::vector<int> hidden = {64, 64};
  std::string activation = "silu";
  TrainConfig config;
};

struct RunConfig {
  std::string experiment = "run";
  std::uint64_t seed = 0;
  std::filesystem::path output_dir;
  double sigma = 25.0;
  std::optional<PriorSpec> signal_prior;
  std::optional<PriorSpec> noise_prior;
  std::optional<ProblemSpec> problem;
  GuidanceParams guidance;
  SamplerConfig sampler;
  std::optional<TrainSpec> train;
  std::optional<BenchSpec> bench;
  bool eval_clip = true;

  json resolved;  // every default materialised

  DiffusionSchedule schedule() const { return DiffusionSchedule(sigma); }
};

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> rule;
  std::optional<std::filesystem::path> output_dir;
};

/// Parses and validates a config, rejecting unknown keys. Overrides are
/// applied before defaults are derived from the seed.
RunConfig parse_config(json j, const Overrides& overrides = {});
RunConfig load_config(const std::filesystem::path& path, const Overrides& overrides = {});

std::vector<Vector> build_dataset(const DatasetSpec& spec, const DiffusionSchedule& schedule);
Prior build_prior(const PriorSpec& spec, const DiffusionSchedule& schedule, std::uint64_t seed);
/// Problem `index` of the configured set; deterministic in (config, index).
InverseProblem build_problem(const RunConfig& config, int index, const Prior& signal_prior,
                             const Prior& noise_prior);

}  // namespace sndiff::app
