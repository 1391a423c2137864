#pragma once

#include "run_config.hpp"

#include <filesystem>
#include <iosfwd>

namespace sndiff::app {

/// Each command returns a process exit code: 0 ok, 2 config/data error,
/// 3 numeric failure. Library errors are mapped by run_command().
int cmd_train(const RunConfig& config, std::ostream& log);
int cmd_sample(const RunConfig& config, std::ostream& log);
int cmd_eval(const std::filesystem::path& run_dir, std::ostream& log);
int cmd_bench(const RunConfig& config, std::ostream& log);

void write_resolved_config(const RunConfig& config, const std::filesystem::path& dir);

}  // namespace sndiff::app
