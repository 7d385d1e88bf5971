#pragma once

// Small models and corpora shared by the unit and acceptance tests.

#include <algorithm>
#include <cmath>

#include "s2wtm/priors.hpp"
#include "s2wtm/spherical_ot.hpp"
#include "s2wtm/topic_model.hpp"

namespace fixtures {

using namespace s2wtm;

inline model::ModelConfig toy_config(model::Geometry geometry = model::Geometry::Spherical) {
  model::ModelConfig c;
  c.topics = 4;
  c.vocab = 30;
  c.encoder_hidden1 = 12;
  c.encoder_hidden2 = 10;
  c.decoder_hidden = 8;
  c.dropout = 0.3;
  c.projections = 16;
  c.lambda = 5.0;
  c.batch_size = 4;
  c.epochs = 1;
  c.geometry = geometry;
  c.prior = geometry == model::Geometry::Spherical ? priors::default_prior("vmf", 4, 2.0)
                                                   : priors::default_prior("dirichlet", 4);
  return c;
}

inline Eigen::MatrixXd toy_batch(Eigen::Index docs, Eigen::Index vocab, RngStream& rng) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(docs, vocab);
  for (Eigen::Index d = 0; d < docs; ++d)
    for (int t = 0; t < 12; ++t) x(d, static_cast<Eigen::Index>(rng.uniform() * static_cast<double>(vocab))) += 1;
  return x;
}

struct GradientCheck {
  double relative_error = 0;  ///< ||analytic - numeric|| / ||numeric|| over all parameters
  double worst_entry = 0;     ///< max entry-wise relative error with a 1e-4 floor
  std::size_t entries = 0;
};

/// Central differences of the full training loss (reconstruction + lambda * OT)
/// against backprop, with dropout masks, sort orders and matchings frozen
/// from the first pass and a fixed projection set.
inline GradientCheck check_loss_gradient(const model::ModelConfig& config, std::uint64_t seed, double h = 1e-6) {
  RngStream rng(seed);
  const model::ModelParams params = model::init_params(config, rng.split("init"));
  model::Network net(config, params, true);
  Graph& g = net.graph();
  RngStream data_rng = rng.split("data");
  RngStream prior_rng = rng.split("prior");
  const Bindings inputs{{"x", toy_batch(config.batch_size, config.vocab, data_rng)},
                        {"prior", priors::sample_prior(config.prior, config.batch_size, prior_rng)},
                        {"projections", model::sample_projections(config, rng.split("projections"))}};
  const RngStream dropout_rng = rng.split("dropout");
  g.forward(inputs, {Mode::Train, &dropout_rng, false, 1});
  g.backward(net.loss());
  const ForwardOptions replay{Mode::Train, &dropout_rng, true, 1};

  GradientCheck out;
  double diff2 = 0, norm2 = 0;
  for (Var p : net.parameters()) {
    const Eigen::MatrixXd analytic = g.grad(p);
    Eigen::MatrixXd& value = g.parameter_value(p);
    for (Eigen::Index i = 0; i < value.size(); ++i) {
      const double saved = value(i);
      value(i) = saved + h;
      g.forward(inputs, replay);
      const double up = g.value(net.loss())(0, 0);
      value(i) = saved - h;
      g.forward(inputs, replay);
      const double down = g.value(net.loss())(0, 0);
      value(i) = saved;
      const double numeric = (up - down) / (2 * h);
      diff2 += (numeric - analytic(i)) * (numeric - analytic(i));
      norm2 += numeric * numeric;
      out.worst_entry = std::max(out.worst_entry, std::abs(numeric - analytic(i)) /
                                                      std::max({std::abs(numeric), std::abs(analytic(i)), 1e-4}));
      ++out.entries;
    }
  }
  out.relative_error = std::sqrt(diff2 / norm2);
  return out;
}

}  // namespace fixtures
