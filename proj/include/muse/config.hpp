#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "muse/evaluation.hpp"
#include "muse/graph.hpp"
#include "muse/training.hpp"

namespace muse {

struct EvalOptions {
  std::string task = "classify";  // classify | cluster
  std::size_t n_splits = 10;
  SplitRatio ratio;
  std::uint64_t seed = 0;
  ProbeConfig probe;
};

// Everything a run needs. Relative paths in a config file are resolved
// against the directory containing that file.
struct RunConfig {
  std::filesystem::path dataset_dir;
  std::filesystem::path output_dir;
  TrainConfig train;
  EvalOptions eval;
};

// Strict: unknown keys, wrong types and out-of-range values throw
// ConfigError naming the field; syntax errors name the line.
RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

// Fully resolved form; parse_run_config(to_json(c).dump()) reproduces c.
nlohmann::ordered_json to_json(const RunConfig& cfg);

void validate_eval_options(const EvalOptions& opts);

}  // namespace muse
