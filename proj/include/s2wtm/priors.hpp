#pragma once

// Samplers for the latent priors: uniform on the sphere, von Mises-Fisher,
// mixtures of vMF, and (for the Euclidean ablation) Dirichlet on the simplex.
// Every sampler returns an n x dim matrix with one sample per row.

#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "s2wtm/rng.hpp"

namespace s2wtm::priors {

/// vMF(mu, kappa), density proportional to exp(kappa * mu^T x) on the sphere.
/// The normalizer c_K(kappa) involves a modified Bessel function; sampling
/// never needs it.
struct VmfParams {
  Eigen::VectorXd mu;
  double kappa = 0.0;

  void validate() const;
};

struct MvmfParams {
  std::vector<VmfParams> components;
  Eigen::VectorXd weights;

  void validate() const;
};

struct UniformSphere {
  Eigen::Index dim = 0;
};

struct Dirichlet {
  Eigen::VectorXd concentration;
};

using PriorSpec = std::variant<UniformSphere, VmfParams, MvmfParams, Dirichlet>;

Eigen::Index prior_dimension(const PriorSpec& prior);
bool is_spherical(const PriorSpec& prior);
/// "uniform", "vmf", "mvmf" or "dirichlet".
std::string prior_name(const PriorSpec& prior);

/// Defaults used when a config names only the prior family:
///   vmf       mu = normalized all-ones, kappa = 10
///   mvmf      K components at the basis vectors e_k, equal weights, kappa = 10
///   dirichlet concentration 1/K per coordinate
PriorSpec default_prior(std::string_view name, Eigen::Index dim, double kappa = 10.0);

Eigen::MatrixXd sample_uniform_sphere(Eigen::Index dim, Eigen::Index n, RngStream& rng);

/// Radial component t = mu^T x of a vMF sample, drawn by rejection from the
/// density proportional to exp(kappa t) (1 - t^2)^((dim - 3) / 2) using the
/// beta-distribution envelope. Throws NumericError after 1000 rejections.
double sample_vmf_radial(double kappa, Eigen::Index dim, RngStream& rng);

Eigen::MatrixXd sample_vmf(const VmfParams& params, Eigen::Index n, RngStream& rng);

/// Components are drawn categorically from rng.split("categorical"); the
/// samples of component t then come from sample_vmf on rng.split(t), in row order.
Eigen::MatrixXd sample_mvmf(const MvmfParams& params, Eigen::Index n, RngStream& rng);

Eigen::MatrixXd sample_dirichlet(const Eigen::VectorXd& alpha, Eigen::Index n, RngStream& rng);

Eigen::MatrixXd sample_prior(const PriorSpec& prior, Eigen::Index n, RngStream& rng);

/// Householder reflection H with H e_1 = mu (H symmetric and orthogonal).
Eigen::MatrixXd householder_to(const Eigen::VectorXd& mu);

}  // namespace s2wtm::priors
