#include "s2wtm/priors.hpp"

#include <cmath>
#include <random>

#include "s2wtm/errors.hpp"

namespace s2wtm::priors {

namespace {

constexpr int kMaxRejections = 1000;

/// u = e_1 - mu with the first coordinate computed without cancellation.
Eigen::VectorXd reflection_axis(const Eigen::VectorXd& mu) {
  Eigen::VectorXd u = -mu;
  const double tail = mu.tail(mu.size() - 1).squaredNorm();
  u(0) = mu(0) > 0.0 ? tail / (1.0 + mu(0)) : 1.0 - mu(0);
  return u;
}

void check_unit(const Eigen::VectorXd& mu, double tol) {
  if (mu.size() < 2) throw ConfigError("mean direction must have dimension >= 2");
  if (std::abs(mu.norm() - 1.0) > tol) throw ConfigError("mean direction is not unit-norm");
}

}  // namespace

void VmfParams::validate() const {
  check_unit(mu, 1e-9);
  if (!(kappa >= 0.0)) throw ConfigError("vMF concentration kappa must be >= 0");
}

void MvmfParams::validate() const {
  if (components.empty()) throw ConfigError("MvMF needs at least one component");
  if (weights.size() != static_cast<Eigen::Index>(components.size()))
    throw ConfigError("MvMF weight count does not match component count");
  for (Eigen::Index i = 0; i < weights.size(); ++i)
    if (!(weights(i) >= 0.0)) throw ConfigError("MvMF weights must be nonnegative");
  if (std::abs(weights.sum() - 1.0) > 1e-9) throw ConfigError("MvMF weights must sum to 1");
  for (const auto& c : components) {
    c.validate();
    if (c.mu.size() != components.front().mu.size()) throw ConfigError("MvMF components differ in dimension");
  }
}

Eigen::Index prior_dimension(const PriorSpec& prior) {
  struct Visitor {
    Eigen::Index operator()(const UniformSphere& p) const { return p.dim; }
    Eigen::Index operator()(const VmfParams& p) const { return p.mu.size(); }
    Eigen::Index operator()(const MvmfParams& p) const {
      return p.components.empty() ? 0 : p.components.front().mu.size();
    }
    Eigen::Index operator()(const Dirichlet& p) const { return p.concentration.size(); }
  };
  return std::visit(Visitor{}, prior);
}

bool is_spherical(const PriorSpec& prior) { return !std::holds_alternative<Dirichlet>(prior); }

std::string prior_name(const PriorSpec& prior) {
  constexpr const char* names[] = {"uniform", "vmf", "mvmf", "dirichlet"};
  return names[prior.index()];
}

PriorSpec default_prior(std::string_view name, Eigen::Index dim, double kappa) {
  if (dim < 2) throw ConfigError("prior dimension must be >= 2");
  if (name == "uniform") return UniformSphere{dim};
  if (name == "vmf") return VmfParams{Eigen::VectorXd::Constant(dim, 1.0 / std::sqrt(static_cast<double>(dim))), kappa};
  if (name == "mvmf") {
    MvmfParams p;
    for (Eigen::Index k = 0; k < dim; ++k) p.components.push_back({Eigen::VectorXd::Unit(dim, k), kappa});
    p.weights = Eigen::VectorXd::Constant(dim, 1.0 / static_cast<double>(dim));
    return p;
  }
  if (name == "dirichlet") return Dirichlet{Eigen::VectorXd::Constant(dim, 1.0 / static_cast<double>(dim))};
  throw ConfigError("unknown prior '" + std::string(name) + "' (expected uniform, vmf, mvmf or dirichlet)");
}

Eigen::MatrixXd sample_uniform_sphere(Eigen::Index dim, Eigen::Index n, RngStream& rng) {
  if (dim < 2) throw DataError("sample_uniform_sphere: dim must be >= 2");
  if (n < 1) throw DataError("sample_uniform_sphere: n must be >= 1");
  Eigen::MatrixXd out(n, dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    double norm = 0.0;
    do {
      for (Eigen::Index j = 0; j < dim; ++j) out(i, j) = rng.normal();
      norm = out.row(i).norm();
    } while (norm < 1e-12);
    out.row(i) /= norm;
  }
  return out;
}

double sample_vmf_radial(double kappa, Eigen::Index dim, RngStream& rng) {
  const double m1 = static_cast<double>(dim - 1);
  const double b = m1 / (2.0 * kappa + std::sqrt(4.0 * kappa * kappa + m1 * m1));
  const double x0 = (1.0 - b) / (1.0 + b);
  const double c = kappa * x0 + m1 * std::log(1.0 - x0 * x0);
  std::gamma_distribution<double> gamma(m1 / 2.0, 1.0);
  for (int attempt = 0; attempt < kMaxRejections; ++attempt) {
    const double g1 = gamma(rng.engine());
    const double g2 = gamma(rng.engine());
    const double beta = g1 / (g1 + g2);
    const double w = (1.0 - (1.0 + b) * beta) / (1.0 - (1.0 - b) * beta);
    const double u = rng.uniform();
    if (kappa * w + m1 * std::log(1.0 - x0 * w) - c >= std::log(u)) return w;
  }
  throw NumericError("vMF radial sampler exceeded 1000 rejections");
}

Eigen::MatrixXd sample_vmf(const VmfParams& params, Eigen::Index n, RngStream& rng) {
  params.validate();
  if (n < 1) throw DataError("sample_vmf: n must be >= 1");
  const Eigen::Index dim = params.mu.size();
  if (params.kappa == 0.0) return sample_uniform_sphere(dim, n, rng);

  const Eigen::VectorXd u = reflection_axis(params.mu);
  const double uu = u.squaredNorm();
  Eigen::MatrixXd out(n, dim);
  Eigen::VectorXd z(dim);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = sample_vmf_radial(params.kappa, dim, rng);
    Eigen::VectorXd v(dim - 1);
    double vn = 0.0;
    do {
      for (Eigen::Index j = 0; j < dim - 1; ++j) v(j) = rng.normal();
      vn = v.norm();
    } while (vn < 1e-12);
    z(0) = t;
    z.tail(dim - 1) = std::sqrt(std::max(0.0, 1.0 - t * t)) * v / vn;
    if (uu > 1e-30) z -= (2.0 * u.dot(z) / uu) * u;
    out.row(i) = z.transpose() / z.norm();
  }
  return out;
}

Eigen::MatrixXd sample_mvmf(const MvmfParams& params, Eigen::Index n, RngStream& rng) {
  params.validate();
  if (n < 1) throw DataError("sample_mvmf: n must be >= 1");
  RngStream categorical = rng.split("categorical");
  std::discrete_distribution<std::size_t> pick(params.weights.data(), params.weights.data() + params.weights.size());
  std::vector<std::size_t> component(static_cast<std::size_t>(n));
  std::vector<Eigen::Index> counts(params.components.size(), 0);
  for (auto& c : component) {
    c = pick(categorical.engine());
    ++counts[c];
  }
  std::vector<Eigen::MatrixXd> draws(params.components.size());
  for (std::size_t t = 0; t < params.components.size(); ++t) {
    if (counts[t] == 0) continue;
    RngStream sub = rng.split(static_cast<std::uint64_t>(t));
    draws[t] = sample_vmf(params.components[t], counts[t], sub);
  }
  const Eigen::Index dim = params.components.front().mu.size();
  Eigen::MatrixXd out(n, dim);
  std::vector<Eigen::Index> used(params.components.size(), 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    const std::size_t t = component[static_cast<std::size_t>(i)];
    out.row(i) = draws[t].row(used[t]++);
  }
  return out;
}

Eigen::MatrixXd sample_dirichlet(const Eigen::VectorXd& alpha, Eigen::Index n, RngStream& rng) {
  if (alpha.size() < 2) throw DataError("sample_dirichlet: need at least two coordinates");
  for (Eigen::Index j = 0; j < alpha.size(); ++j)
    if (!(alpha(j) > 0.0)) throw DataError("sample_dirichlet: concentration must be positive");
  if (n < 1) throw DataError("sample_dirichlet: n must be >= 1");
  Eigen::MatrixXd out(n, alpha.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    double total = 0.0;
    do {
      for (Eigen::Index j = 0; j < alpha.size(); ++j) {
        std::gamma_distribution<double> gamma(alpha(j), 1.0);
        out(i, j) = gamma(rng.engine());
      }
      total = out.row(i).sum();
    } while (!(total > 0.0));
    out.row(i) /= total;
  }
  return out;
}

Eigen::MatrixXd sample_prior(const PriorSpec& prior, Eigen::Index n, RngStream& rng) {
  struct Visitor {
    Eigen::Index n;
    RngStream& rng;
    Eigen::MatrixXd operator()(const UniformSphere& p) const { return sample_uniform_sphere(p.dim, n, rng); }
    Eigen::MatrixXd operator()(const VmfParams& p) const { return sample_vmf(p, n, rng); }
    Eigen::MatrixXd operator()(const MvmfParams& p) const { return sample_mvmf(p, n, rng); }
    Eigen::MatrixXd operator()(const Dirichlet& p) const { return sample_dirichlet(p.concentration, n, rng); }
  };
  return std::visit(Visitor{n, rng}, prior);
}

Eigen::MatrixXd householder_to(const Eigen::VectorXd& mu) {
  check_unit(mu, 1e-6);
  const Eigen::Index dim = mu.size();
  const Eigen::VectorXd u = reflection_axis(mu);
  const double uu = u.squaredNorm();
  if (uu <= 1e-30) return Eigen::MatrixXd::Identity(dim, dim);
  return Eigen::MatrixXd::Identity(dim, dim) - (2.0 / uu) * u * u.transpose();
}

}  // namespace s2wtm::priors
