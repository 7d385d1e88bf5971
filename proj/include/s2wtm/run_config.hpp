#pragma once

// File-driven run configuration. The format is strict JSON: every object
// rejects keys it does not know, and errors name the offending field path.
//
//   {
//     "corpus": "data/planted",          // directory with corpus.tsv + vocabulary.txt
//     "output": "runs/planted",
//     "seeds": [0, 1, 2, 3, 4],
//     "model": { "topics": 5, "projections": 200, "lambda": 1.0, ... },
//     "prior": { "type": "uniform" },
//     "metrics": { "npmi": true, "probe": false, ... }
//   }
//
// Relative paths resolve against the directory holding the config file.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "s2wtm/evaluation.hpp"
#include "s2wtm/topic_model.hpp"

namespace s2wtm::cli {

struct MetricToggles {
  bool npmi = true;
  bool irbo = true;
  bool clustering = true;
  bool probe = true;
  bool collapse = true;
  int window = 10;
  eval::CollapseThresholds collapse_thresholds;
};

struct RunConfig {
  std::filesystem::path corpus;
  std::filesystem::path output;
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  /// When present, must equal the loaded corpus' vocabulary size.
  std::optional<Eigen::Index> vocab;
  /// `model.vocab` is filled in from the corpus; `model.seed` per run.
  model::ModelConfig model;
  MetricToggles metrics;
};

/// Throws ConfigError naming the field on any schema or invariant violation.
RunConfig parse_run_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

/// Parses "0,1,2" style lists.
std::vector<std::uint64_t> parse_u64_list(std::string_view text, std::string_view what);

}  // namespace s2wtm::cli
