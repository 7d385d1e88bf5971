#pragma once

// The autoencoder topic model: a deterministic encoder onto the unit sphere,
// a softmax decoder over the vocabulary, and a training objective of
// reconstruction cross-entropy plus lambda times a sliced OT distance between
// the batch of latent codes and an equal-size batch of prior samples.

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "s2wtm/checkpoint.hpp"
#include "s2wtm/corpus.hpp"
#include "s2wtm/priors.hpp"
#include "s2wtm/rng.hpp"
#include "s2wtm/tensor.hpp"

namespace s2wtm::model {

enum class Geometry {
  Spherical,  ///< L2-normalized latent, SSW distance, spherical prior
  Euclidean,  ///< raw latent, SW distance, Dirichlet prior
};

struct ModelConfig {
  Eigen::Index topics = 0;
  Eigen::Index vocab = 0;
  Eigen::Index encoder_hidden1 = 200;
  Eigen::Index encoder_hidden2 = 200;
  Eigen::Index decoder_hidden = 200;
  double dropout = 0.5;
  priors::PriorSpec prior = priors::UniformSphere{};
  Eigen::Index projections = 1000;
  double lambda = 1.0;
  Eigen::Index batch_size = 64;
  int epochs = 100;
  double learning_rate = 2e-3;
  std::uint64_t seed = 0;
  bool fresh_projections = true;
  Geometry geometry = Geometry::Spherical;
  int workers = 1;

  /// Throws ConfigError on invariant violations, including a prior whose
  /// family does not match the geometry.
  void validate() const;
};

struct ModelParams {
  Eigen::MatrixXd enc_w1, enc_b1, enc_w2, enc_b2, enc_w3, enc_b3;
  Eigen::MatrixXd dec_w1, dec_b1, dec_w2, dec_b2;

  NamedTensors to_named() const;
  static ModelParams from_named(const NamedTensors& tensors);
  bool operator==(const ModelParams&) const = default;
};

/// Glorot-uniform weights, zero biases.
ModelParams init_params(const ModelConfig& config, RngStream rng);

/// The network as a graph. Inputs are named "x" (batch x V counts) and, when
/// built with the loss, "prior" (batch x K) and "projections" (K x 2M planes
/// for spherical geometry, K x M directions for Euclidean).
class Network {
 public:
  Network(const ModelConfig& config, const ModelParams& params, bool with_loss);

  Graph& graph() { return graph_; }
  Var x() const { return x_; }
  Var z() const { return z_; }
  Var reconstruction() const { return x_hat_; }
  Var rl() const { return rl_; }
  Var ot() const { return ot_; }
  Var loss() const { return loss_; }
  std::vector<Var> parameters() const { return params_; }

  ModelParams params() const;

 private:
  Graph graph_;
  Var x_, prior_, projections_;
  Var z_, x_hat_, rl_, ot_, loss_;
  std::vector<Var> params_;
  bool with_loss_;
};

/// Latent codes for the rows of x; rows must contain a positive count.
Eigen::MatrixXd encode(const ModelParams& params, const ModelConfig& config, const Eigen::MatrixXd& x, Mode mode,
                       const RngStream* rng = nullptr);

/// Word distributions for latent codes z.
Eigen::MatrixXd decode(const ModelParams& params, const ModelConfig& config, const Eigen::MatrixXd& z, Mode mode,
                       const RngStream* rng = nullptr);

struct LossParts {
  double total = 0;
  double rl = 0;
  double ot = 0;
};

/// Loss on one batch: mean cross-entropy + lambda * OT(z, prior_samples).
/// `projections` holds packed planes (spherical) or directions (Euclidean).
LossParts training_loss(const ModelParams& params, const ModelConfig& config, const Eigen::MatrixXd& batch,
                        const Eigen::MatrixXd& prior_samples, const Eigen::MatrixXd& projections,
                        const RngStream& dropout_rng);

/// Projection matrix for one step: planes for spherical geometry, directions otherwise.
Eigen::MatrixXd sample_projections(const ModelConfig& config, const RngStream& stream);

struct EpochLog {
  int epoch = 0;
  double rl = 0;
  double ot = 0;
  double seconds = 0;
};

struct TrainResult {
  ModelParams params;
  std::vector<EpochLog> log;
};

/// Adam on training_loss over shuffled mini-batches. Every random choice
/// derives from config.seed through named streams.
TrainResult train(const corpus::BowMatrix& bow, const ModelConfig& config,
                  const std::function<void(const EpochLog&)>& on_epoch = {});

struct TopicSet {
  Eigen::MatrixXd beta;                       ///< K x V, row k = decode(e_k)
  std::vector<std::vector<int>> top_words;    ///< K ranked lists of word ids
};

TopicSet extract_topics(const ModelParams& params, const ModelConfig& config, int top_n = 10);

/// Document-topic proportions softmax(encode(x)), eval mode.
Eigen::MatrixXd infer_doc_topics(const ModelParams& params, const ModelConfig& config, const Eigen::MatrixXd& x);

}  // namespace s2wtm::model
