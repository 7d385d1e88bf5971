#pragma once

// Topic quality and latent-space diagnostics: NPMI coherence, RBO-based
// diversity and alignment, clustering agreement, a linear probe, and a
// collapse check on the aggregated latent codes.

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "s2wtm/corpus.hpp"
#include "s2wtm/rng.hpp"

namespace s2wtm::eval {

using RankedList = std::vector<int>;

struct NpmiOptions {
  int window = 10;
  int top_n = 10;
  double eps = 1e-12;
};

struct NpmiResult {
  std::vector<double> per_topic;
  double mean = 0;
};

/// Probabilities come from boolean sliding windows over the reference
/// documents; a document shorter than the window counts as one window.
NpmiResult npmi(const std::vector<RankedList>& topics, const corpus::Corpus& reference,
                const NpmiOptions& options = {});

/// Pairwise NPMI from window probabilities. A zero joint probability is
/// smoothed by eps; a zero marginal yields -1. Clamped to [-1, 1].
double npmi_pair(double p_i, double p_j, double p_ij, double eps = 1e-12);

/// Extrapolated rank-biased overlap of the first `depth` entries.
double rbo(const RankedList& a, const RankedList& b, double persistence = 0.9, int depth = 10);

/// 1 - mean pairwise rbo over unordered topic pairs.
double irbo(const std::vector<RankedList>& topics, double persistence = 0.9, int depth = 10);

struct AlignedPair {
  int i = 0;
  int j = 0;
  double score = 0;
};

/// Greedy bijection on the K x K rbo matrix, highest score first; ties go to
/// the smaller i, then the smaller j.
std::vector<AlignedPair> align_topics(const std::vector<RankedList>& p, const std::vector<RankedList>& q,
                                      double persistence = 0.9, int depth = 10);
std::vector<AlignedPair> align_matrix(const Eigen::MatrixXd& scores);

struct ClusterScores {
  double nmi = 0;
  double purity = 0;
};

ClusterScores cluster_metrics(const std::vector<int>& labels, const std::vector<int>& clusters);

/// Row-wise argmax, ties to the lowest index.
std::vector<int> argmax_rows(const Eigen::MatrixXd& theta);

struct ProbeOptions {
  int steps = 500;
  double learning_rate = 0.1;
  double l2 = 1e-4;
};

/// Multinomial logistic regression trained by full-batch gradient descent;
/// returns test accuracy.
double linear_probe(const Eigen::MatrixXd& theta_train, const std::vector<int>& labels_train,
                    const Eigen::MatrixXd& theta_test, const std::vector<int>& labels_test, std::uint64_t seed,
                    const ProbeOptions& options = {});

struct CollapseThresholds {
  double variance = 1e-6;
  double mean_distance = 1e-4;
};

struct CollapseReport {
  Eigen::VectorXd variance;
  double mean_pairwise_distance = 0;
  double ot_to_prior = 0;
  bool collapsed = false;
};

/// `spherical` selects ssw2 (rows on the sphere) or sliced_w2 for the
/// distance to the prior samples, which must match Z's row count.
CollapseReport collapse_diagnostic(const Eigen::MatrixXd& z, const Eigen::MatrixXd& prior_samples,
                                   Eigen::Index projections, const RngStream& rng, bool spherical = true,
                                   const CollapseThresholds& thresholds = {});

}  // namespace s2wtm::eval
