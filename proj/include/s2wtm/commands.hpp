#pragma once

// The command layer behind the s2wtm executable. Every command is a plain
// function so tests can drive it without spawning processes.
//
// Per-seed artifacts live in <out>/seed_<s>/:
//   checkpoint.bin  topics.json  beta.csv  theta.csv  train_log.csv  metrics.json
// and run-level files in <out>/: metrics_median.json, bench.csv, ablation.tsv.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "s2wtm/corpus.hpp"
#include "s2wtm/run_config.hpp"
#include "s2wtm/synthetic.hpp"
#include "s2wtm/topic_model.hpp"

namespace s2wtm::cli {

std::filesystem::path seed_dir(const std::filesystem::path& out, std::uint64_t seed);

/// Loads the configured corpus and fills in model.vocab, checking any
/// declared vocabulary size against it.
corpus::Corpus load_config_corpus(RunConfig& config);

struct TrainedRun {
  std::uint64_t seed = 0;
  model::ModelParams params;
  model::TopicSet topics;
  std::vector<model::EpochLog> log;
};

/// Trains one seed and writes its artifacts when `dir` is non-empty.
TrainedRun train_seed(const corpus::Corpus& corpus, const corpus::BowMatrix& bow, const model::ModelConfig& config,
                      std::uint64_t seed, const std::filesystem::path& dir, std::ostream* progress);

void cmd_train(RunConfig config, std::ostream& progress);

/// Writes metrics.json per seed directory found under config.output and the
/// element-wise median to metrics_median.json.
void cmd_evaluate(RunConfig config, std::ostream& progress);

void cmd_align(const std::filesystem::path& topics_a, const std::filesystem::path& topics_b,
               const std::filesystem::path& out_file);

struct BenchRow {
  Eigen::Index projections = 0;
  double npmi = 0;
  double seconds_per_epoch = 0;
};

std::vector<BenchRow> cmd_bench(RunConfig config, const std::vector<std::uint64_t>& m_list, std::ostream& progress);

struct AblationRow {
  std::string metric;
  double euclidean = 0;
  double spherical = 0;
};

/// Trains both geometries on every configured seed and reports per-metric
/// medians. The Euclidean leg always uses the sliced distance and a Dirichlet
/// prior with concentration 1/K.
std::vector<AblationRow> cmd_ablate(RunConfig config, std::ostream& progress);

/// Writes a planted-topic corpus (corpus.tsv, vocabulary.txt) and its
/// reference topics (planted_topics.json, same schema as topics.json).
void cmd_synth(const synthetic::PlantedOptions& options, const std::filesystem::path& out);

// File helpers shared with tests.

void write_topics_json(const std::filesystem::path& path, const std::vector<std::vector<std::string>>& topics,
                       std::uint64_t seed);
std::vector<std::vector<std::string>> read_topics_json(const std::filesystem::path& path);
void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_csv(const std::filesystem::path& path);

}  // namespace s2wtm::cli
