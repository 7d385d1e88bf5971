#include "s2wtm/topic_model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>

#include "s2wtm/errors.hpp"
#include "s2wtm/spherical_ot.hpp"

namespace s2wtm::model {

void ModelConfig::validate() const {
  if (topics < 2) throw ConfigError("topics must be >= 2");
  if (vocab < topics) throw ConfigError("vocabulary size must be >= topics");
  if (encoder_hidden1 < 1 || encoder_hidden2 < 1 || decoder_hidden < 1) throw ConfigError("hidden widths must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("dropout must lie in [0, 1)");
  if (!(lambda >= 0.0)) throw ConfigError("lambda must be >= 0");
  if (projections < 1) throw ConfigError("projections must be >= 1");
  if (batch_size < 2) throw ConfigError("batch_size must be >= 2");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (priors::prior_dimension(prior) != topics) throw ConfigError("prior dimension must equal the topic count");
  const bool spherical_prior = priors::is_spherical(prior);
  if (geometry == Geometry::Spherical && !spherical_prior)
    throw ConfigError("spherical geometry requires a uniform, vmf or mvmf prior");
  if (geometry == Geometry::Euclidean && spherical_prior)
    throw ConfigError("euclidean geometry requires a dirichlet prior");
  if (const auto* v = std::get_if<priors::VmfParams>(&prior)) v->validate();
  if (const auto* m = std::get_if<priors::MvmfParams>(&prior)) m->validate();
}

NamedTensors ModelParams::to_named() const {
  auto vec = [](const Eigen::MatrixXd& b) { return Tensor::vector(b.row(0).transpose()); };
  return {
      {"encoder.0.weight", Tensor::matrix(enc_w1)}, {"encoder.0.bias", vec(enc_b1)},
      {"encoder.1.weight", Tensor::matrix(enc_w2)}, {"encoder.1.bias", vec(enc_b2)},
      {"encoder.2.weight", Tensor::matrix(enc_w3)}, {"encoder.2.bias", vec(enc_b3)},
      {"decoder.0.weight", Tensor::matrix(dec_w1)}, {"decoder.0.bias", vec(dec_b1)},
      {"decoder.1.weight", Tensor::matrix(dec_w2)}, {"decoder.1.bias", vec(dec_b2)},
  };
}

ModelParams ModelParams::from_named(const NamedTensors& tensors) {
  ModelParams p;
  std::pair<const char*, Eigen::MatrixXd*> slots[] = {
      {"encoder.0.weight", &p.enc_w1}, {"encoder.0.bias", &p.enc_b1}, {"encoder.1.weight", &p.enc_w2},
      {"encoder.1.bias", &p.enc_b2},   {"encoder.2.weight", &p.enc_w3}, {"encoder.2.bias", &p.enc_b3},
      {"decoder.0.weight", &p.dec_w1}, {"decoder.0.bias", &p.dec_b1}, {"decoder.1.weight", &p.dec_w2},
      {"decoder.1.bias", &p.dec_b2},
  };
  for (auto& [name, dst] : slots) {
    auto it = std::find_if(tensors.begin(), tensors.end(), [&](const auto& t) { return t.first == name; });
    if (it == tensors.end()) throw DataError(std::string("checkpoint is missing tensor ") + name);
    *dst = it->second.values;
  }
  auto chain = [](const Eigen::MatrixXd& w, const Eigen::MatrixXd& b) { return w.cols() == b.cols() && b.rows() == 1; };
  if (!chain(p.enc_w1, p.enc_b1) || !chain(p.enc_w2, p.enc_b2) || !chain(p.enc_w3, p.enc_b3) ||
      !chain(p.dec_w1, p.dec_b1) || !chain(p.dec_w2, p.dec_b2) || p.enc_w1.cols() != p.enc_w2.rows() ||
      p.enc_w2.cols() != p.enc_w3.rows() || p.enc_w3.cols() != p.dec_w1.rows() || p.dec_w1.cols() != p.dec_w2.rows() ||
      p.dec_w2.cols() != p.enc_w1.rows())
    throw DataError("checkpoint tensors have inconsistent shapes");
  return p;
}

ModelParams init_params(const ModelConfig& config, RngStream rng) {
  auto glorot = [&](Eigen::Index in, Eigen::Index out) {
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    Eigen::MatrixXd w(in, out);
    for (Eigen::Index c = 0; c < out; ++c)
      for (Eigen::Index r = 0; r < in; ++r) w(r, c) = limit * (2.0 * rng.uniform() - 1.0);
    return w;
  };
  ModelParams p;
  p.enc_w1 = glorot(config.vocab, config.encoder_hidden1);
  p.enc_b1 = Eigen::MatrixXd::Zero(1, config.encoder_hidden1);
  p.enc_w2 = glorot(config.encoder_hidden1, config.encoder_hidden2);
  p.enc_b2 = Eigen::MatrixXd::Zero(1, config.encoder_hidden2);
  p.enc_w3 = glorot(config.encoder_hidden2, config.topics);
  p.enc_b3 = Eigen::MatrixXd::Zero(1, config.topics);
  p.dec_w1 = glorot(config.topics, config.decoder_hidden);
  p.dec_b1 = Eigen::MatrixXd::Zero(1, config.decoder_hidden);
  p.dec_w2 = glorot(config.decoder_hidden, config.vocab);
  p.dec_b2 = Eigen::MatrixXd::Zero(1, config.vocab);
  return p;
}

Network::Network(const ModelConfig& config, const ModelParams& p, bool with_loss) : with_loss_(with_loss) {
  Graph& g = graph_;
  auto param = [&](const char* name, const Eigen::MatrixXd& init) {
    Var v = g.parameter(name, init);
    params_.push_back(v);
    return v;
  };
  const Var w1 = param("encoder.0.weight", p.enc_w1), b1 = param("encoder.0.bias", p.enc_b1);
  const Var w2 = param("encoder.1.weight", p.enc_w2), b2 = param("encoder.1.bias", p.enc_b2);
  const Var w3 = param("encoder.2.weight", p.enc_w3), b3 = param("encoder.2.bias", p.enc_b3);
  const Var d1 = param("decoder.0.weight", p.dec_w1), c1 = param("decoder.0.bias", p.dec_b1);
  const Var d2 = param("decoder.1.weight", p.dec_w2), c2 = param("decoder.1.bias", p.dec_b2);

  // The decoder-only path used by decode() feeds "z" directly.
  x_ = g.input("x");
  const Var h1 = relu(dropout(add_bias(matmul(x_, w1), b1), config.dropout));
  const Var h2 = relu(dropout(add_bias(matmul(h1, w2), b2), config.dropout));
  const Var raw = add_bias(matmul(h2, w3), b3);
  z_ = config.geometry == Geometry::Spherical ? l2_normalize(raw) : raw;
  const Var h3 = relu(dropout(add_bias(matmul(z_, d1), c1), config.dropout));
  x_hat_ = softmax(add_bias(matmul(h3, d2), c2));
  if (!with_loss) return;

  prior_ = g.input("prior");
  projections_ = g.input("projections");
  rl_ = cross_entropy(x_, x_hat_);
  if (config.geometry == Geometry::Spherical) {
    ot_ = circular_w2_cost(sort_columns(circle_angles(z_, projections_)),
                           sort_columns(circle_angles(prior_, projections_)));
  } else {
    ot_ = squared_diff_mean(sort_columns(matmul(z_, projections_)), sort_columns(matmul(prior_, projections_)));
  }
  loss_ = rl_ + scale(ot_, config.lambda);
}

ModelParams Network::params() const {
  NamedTensors named;
  for (Var v : params_) named.emplace_back(std::string(graph_.name(v)), Tensor::matrix(graph_.value(v)));
  // Biases are stored as 1 x n rows; from_named only reads values.
  return ModelParams::from_named(named);
}

namespace {

void check_documents(const Eigen::MatrixXd& x, Eigen::Index vocab) {
  if (x.cols() != vocab) throw DataError("document vectors must have vocabulary width");
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    if ((x.row(r).array() < 0.0).any()) throw DataError("document " + std::to_string(r) + " has negative counts");
    if (!(x.row(r).maxCoeff() > 0.0)) throw DataError("document " + std::to_string(r) + " is all zeros");
  }
}

}  // namespace

Eigen::MatrixXd encode(const ModelParams& params, const ModelConfig& config, const Eigen::MatrixXd& x, Mode mode,
                       const RngStream* rng) {
  check_documents(x, params.enc_w1.rows());
  Network net(config, params, false);
  Graph& g = net.graph();
  // Only the encoder half is needed; evaluating the decoder on the same
  // inputs is cheap relative to a separate graph definition.
  g.forward({{"x", x}}, {mode, rng, false, config.workers});
  return g.value(net.z());
}

Eigen::MatrixXd decode(const ModelParams& params, const ModelConfig& config, const Eigen::MatrixXd& z, Mode mode,
                       const RngStream* rng) {
  if (z.cols() != params.dec_w1.rows()) throw DataError("latent codes must have topic-count width");
  Graph g;
  const Var zin = g.input("z");
  const Var h = relu(dropout(add_bias(matmul(zin, g.parameter("decoder.0.weight", params.dec_w1)),
                                      g.parameter("decoder.0.bias", params.dec_b1)),
                             config.dropout));
  const Var out = softmax(add_bias(matmul(h, g.parameter("decoder.1.weight", params.dec_w2)),
                                   g.parameter("decoder.1.bias", params.dec_b2)));
  g.forward({{"z", z}}, {mode, rng, false, config.workers});
  return g.value(out);
}

Eigen::MatrixXd sample_projections(const ModelConfig& config, const RngStream& stream) {
  return config.geometry == Geometry::Spherical ? ot::sample_planes(config.topics, config.projections, stream)
                                                : ot::sample_directions(config.topics, config.projections, stream);
}

LossParts training_loss(const ModelParams& params, const ModelConfig& config, const Eigen::MatrixXd& batch,
                        const Eigen::MatrixXd& prior_samples, const Eigen::MatrixXd& projections,
                        const RngStream& dropout_rng) {
  config.validate();
  if (batch.rows() != prior_samples.rows()) throw DataError("batch size and prior sample count differ");
  check_documents(batch, config.vocab);
  Network net(config, params, true);
  Graph& g = net.graph();
  g.forward({{"x", batch}, {"prior", prior_samples}, {"projections", projections}},
            {Mode::Train, &dropout_rng, false, config.workers});
  return {g.value(net.loss())(0, 0), g.value(net.rl())(0, 0), g.value(net.ot())(0, 0)};
}

TrainResult train(const corpus::BowMatrix& bow, const ModelConfig& config,
                  const std::function<void(const EpochLog&)>& on_epoch) {
  config.validate();
  if (bow.rows() == 0) throw DataError("cannot train on an empty corpus");
  if (bow.vocab_size() != config.vocab)
    throw ConfigError("config vocabulary size " + std::to_string(config.vocab) + " does not match corpus (" +
                      std::to_string(bow.vocab_size()) + ")");
  const Eigen::Index docs = bow.rows();
  const Eigen::Index batch = config.batch_size;
  const RngStream root(config.seed);

  TrainResult result;
  Network net(config, init_params(config, root.split("init")), true);
  Graph& g = net.graph();
  std::vector<Var> params = net.parameters();
  AdamState adam;
  adam.learning_rate = config.learning_rate;

  const RngStream fixed_projections_stream = root.split("projections");
  Eigen::MatrixXd fixed_projections;
  if (!config.fresh_projections) fixed_projections = sample_projections(config, fixed_projections_stream);

  std::vector<std::size_t> order(static_cast<std::size_t>(docs));
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::iota(order.begin(), order.end(), std::size_t{0});
    RngStream shuffle = root.split("shuffle").split(static_cast<std::uint64_t>(epoch));
    std::shuffle(order.begin(), order.end(), shuffle.engine());

    double rl_sum = 0, ot_sum = 0;
    int steps = 0;
    for (Eigen::Index begin = 0, step = 0; begin < docs; begin += batch, ++step) {
      const Eigen::Index end = std::min(docs, begin + batch);
      if (end - begin < 2) break;
      std::vector<std::size_t> rows(order.begin() + begin, order.begin() + end);
      if (static_cast<Eigen::Index>(rows.size()) < batch) {
        // Pad a short final batch by resampling its own rows.
        RngStream pad = root.split("pad").split(static_cast<std::uint64_t>(epoch));
        std::uniform_int_distribution<std::size_t> pick(0, rows.size() - 1);
        while (static_cast<Eigen::Index>(rows.size()) < batch) rows.push_back(rows[pick(pad.engine())]);
      }
      const auto step_index = static_cast<std::uint64_t>(step);
      const auto epoch_index = static_cast<std::uint64_t>(epoch);
      RngStream prior_stream = root.split("prior").split(epoch_index).split(step_index);
      const RngStream dropout_stream = root.split("dropout").split(epoch_index).split(step_index);

      Bindings inputs;
      inputs.emplace("x", bow.dense_rows(rows));
      inputs.emplace("prior", priors::sample_prior(config.prior, batch, prior_stream));
      inputs.emplace("projections",
                     config.fresh_projections
                         ? sample_projections(config, root.split("projections").split(epoch_index).split(step_index))
                         : fixed_projections);
      g.forward(inputs, {Mode::Train, &dropout_stream, false, config.workers});
      const double loss = g.value(net.loss())(0, 0);
      if (!std::isfinite(loss))
        throw NumericError("non-finite loss at epoch " + std::to_string(epoch + 1) + ", step " +
                           std::to_string(step + 1));
      g.backward(net.loss());

      std::vector<Eigen::MatrixXd*> values;
      std::vector<const Eigen::MatrixXd*> grads;
      for (Var v : params) {
        values.push_back(&g.parameter_value(v));
        grads.push_back(&g.grad(v));
      }
      adam_step(values, grads, adam);
      rl_sum += g.value(net.rl())(0, 0);
      ot_sum += g.value(net.ot())(0, 0);
      ++steps;
    }
    EpochLog entry;
    entry.epoch = epoch + 1;
    entry.rl = steps ? rl_sum / steps : 0.0;
    entry.ot = steps ? ot_sum / steps : 0.0;
    entry.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
  }
  result.params = net.params();
  return result;
}

TopicSet extract_topics(const ModelParams& params, const ModelConfig& config, int top_n) {
  const Eigen::Index k = params.dec_w1.rows();
  TopicSet topics;
  topics.beta = decode(params, config, Eigen::MatrixXd::Identity(k, k), Mode::Eval);
  const Eigen::Index v = topics.beta.cols();
  const auto n = static_cast<std::size_t>(std::min<Eigen::Index>(top_n, v));
  for (Eigen::Index t = 0; t < k; ++t) {
    std::vector<int> idx(static_cast<std::size_t>(v));
    std::iota(idx.begin(), idx.end(), 0);
    const auto row = topics.beta.row(t);
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n), idx.end(), [&](int a, int b) {
      return row(a) > row(b) || (row(a) == row(b) && a < b);
    });
    idx.resize(n);
    topics.top_words.push_back(std::move(idx));
  }
  return topics;
}

Eigen::MatrixXd infer_doc_topics(const ModelParams& params, const ModelConfig& config, const Eigen::MatrixXd& x) {
  const Eigen::MatrixXd z = encode(params, config, x, Mode::Eval);
  Eigen::MatrixXd theta(z.rows(), z.cols());
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const Eigen::RowVectorXd e = (z.row(r).array() - z.row(r).maxCoeff()).exp().matrix();
    theta.row(r) = e / e.sum();
  }
  return theta;
}

}  // namespace s2wtm::model
