#pragma once

// Reference computations that share no code with the library: exhaustive or
// assignment-based transport costs, quadrature for the vMF radial moment,
// and the two-sample Kolmogorov-Smirnov statistic.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

namespace oracle {

inline double circle_geodesic(double x, double y) {
  const double d = std::fmod(std::abs(x - y), 1.0);
  return std::min(d, 1.0 - d);
}

/// Minimum-cost perfect matching on a square cost matrix (Hungarian method,
/// potentials form). Returns the optimal total cost.
inline double assignment_cost(const std::vector<std::vector<double>>& cost) {
  const std::size_t n = cost.size();
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> p(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, inf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  double total = 0.0;
  for (std::size_t j = 1; j <= n; ++j) total += cost[p[j] - 1][j - 1];
  return total;
}

/// Circular W2^2 between two equal-size empirical measures on [0, 1), as the
/// optimal assignment under squared geodesic distance.
inline double circle_w2_assignment(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<std::vector<double>> cost(x.size(), std::vector<double>(y.size()));
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < y.size(); ++j) cost[i][j] = std::pow(circle_geodesic(x[i], y[j]), 2);
  return assignment_cost(cost) / static_cast<double>(x.size());
}

/// 1-D W_p^p between equal-size empirical measures by enumerating every
/// permutation coupling (the extreme points of the coupling polytope).
inline double w1d_enumerate(const std::vector<double>& x, const std::vector<double>& y, double p) {
  std::vector<std::size_t> perm(y.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  double best = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) c += std::pow(std::abs(x[i] - y[perm[i]]), p);
    best = std::min(best, c / static_cast<double>(x.size()));
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

/// E[t] under the density proportional to exp(kappa t) (1 - t^2)^((dim - 3) / 2)
/// on [-1, 1], by composite Simpson quadrature.
inline double vmf_radial_mean(double kappa, int dim, int intervals = 400000) {
  const double a = 0.5 * (dim - 3);
  auto weight = [&](double t) {
    const double s = std::max(0.0, 1.0 - t * t);
    return std::exp(kappa * (t - 1.0)) * (a == 0.0 ? 1.0 : std::pow(s, a));
  };
  const double h = 2.0 / intervals;
  double num = 0.0, den = 0.0;
  for (int i = 0; i <= intervals; ++i) {
    const double t = -1.0 + i * h;
    const double c = (i == 0 || i == intervals) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    num += c * t * weight(t);
    den += c * weight(t);
  }
  return num / den;
}

/// Same density, second moment (for the standard error of the sample mean).
inline double vmf_radial_variance(double kappa, int dim, int intervals = 400000) {
  const double a = 0.5 * (dim - 3);
  auto weight = [&](double t) {
    const double s = std::max(0.0, 1.0 - t * t);
    return std::exp(kappa * (t - 1.0)) * (a == 0.0 ? 1.0 : std::pow(s, a));
  };
  const double h = 2.0 / intervals;
  double m1 = 0.0, m2 = 0.0, den = 0.0;
  for (int i = 0; i <= intervals; ++i) {
    const double t = -1.0 + i * h;
    const double c = (i == 0 || i == intervals) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    m1 += c * t * weight(t);
    m2 += c * t * t * weight(t);
    den += c * weight(t);
  }
  const double mean = m1 / den;
  return m2 / den - mean * mean;
}

/// Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double t = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= t) ++i;
    while (j < b.size() && b[j] <= t) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  return d;
}

/// Critical value of the two-sample KS statistic at level alpha = 0.01.
inline double ks_critical_001(std::size_t n, std::size_t m) {
  return 1.628 * std::sqrt(static_cast<double>(n + m) / (static_cast<double>(n) * static_cast<double>(m)));
}

}  // namespace oracle
