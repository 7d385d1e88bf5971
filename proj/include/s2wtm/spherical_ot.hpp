#pragma once

// Great-circle projections, 1-D and circular Wasserstein solvers, and the
// sliced estimators on the sphere (SSW) and in Euclidean space (SW).
//
// Circle coordinates use unit circumference: a point on a great circle is an
// angle in [0, 1). All measures are equal-weight empirical measures with the
// same number of atoms on both sides.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "s2wtm/errors.hpp"
#include "s2wtm/rng.hpp"

namespace s2wtm::ot {

/// A d x 2 matrix with orthonormal columns spanning one great circle.
template <typename Scalar = double>
struct ProjectionPlane {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 2> basis;
};

/// Angles in [0, 1) on a great circle, one per projected point.
template <typename Scalar = double>
struct CircleSample {
  std::vector<Scalar> angles;
};

/// Below this in-plane norm a point has no defined projection; it is mapped
/// to angle 0 and receives no gradient.
inline constexpr double kDegenerateInPlaneNorm = 1e-12;

/// atan2(b, a) / 2pi wrapped into [0, 1).
template <typename Scalar>
Scalar circle_coordinate(Scalar a, Scalar b) {
  if (std::hypot(a, b) < Scalar(kDegenerateInPlaneNorm)) return Scalar(0);
  Scalar t = std::atan2(b, a) / (Scalar(2) * std::numbers::pi_v<Scalar>);
  if (t < Scalar(0)) t += Scalar(1);
  if (t >= Scalar(1)) t = Scalar(0);
  return t;
}

/// Geodesic projection of each row of `points` onto the plane's great circle,
/// parameterized by arc length.
template <typename Derived, typename Scalar = typename Derived::Scalar>
CircleSample<Scalar> project_to_circle(const Eigen::MatrixBase<Derived>& points,
                                       const ProjectionPlane<Scalar>& plane) {
  if (points.cols() != plane.basis.rows()) throw DataError("project_to_circle: dimension mismatch");
  const Eigen::Matrix<Scalar, Eigen::Dynamic, 2> coords = points * plane.basis;
  CircleSample<Scalar> out;
  out.angles.resize(static_cast<std::size_t>(coords.rows()));
  for (Eigen::Index i = 0; i < coords.rows(); ++i)
    out.angles[static_cast<std::size_t>(i)] = circle_coordinate(coords(i, 0), coords(i, 1));
  return out;
}

/// W_p^p between two equal-size empirical measures on the line:
/// (1/n) sum_i |x_(i) - y_(i)|^p over sorted order.
template <typename Scalar>
Scalar wasserstein_1d(std::span<const Scalar> xs, std::span<const Scalar> ys, Scalar p = Scalar(2)) {
  if (xs.size() != ys.size()) throw DataError("wasserstein_1d: sample sizes differ");
  if (xs.empty()) throw DataError("wasserstein_1d: empty sample");
  if (!(p >= Scalar(1))) throw DataError("wasserstein_1d: p must be >= 1");
  std::vector<Scalar> a(xs.begin(), xs.end()), b(ys.begin(), ys.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  Scalar total = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Scalar d = std::abs(a[i] - b[i]);
    total += p == Scalar(2) ? d * d : std::pow(d, p);
  }
  return total / static_cast<Scalar>(a.size());
}

namespace detail {

inline std::ptrdiff_t floor_div(std::ptrdiff_t a, std::ptrdiff_t n) {
  std::ptrdiff_t q = a / n;
  if ((a % n != 0) && ((a < 0) != (n < 0))) --q;
  return q;
}

/// y_(i+shift) unrolled onto the real line: indices past the end wrap with +1
/// per full turn, indices before the start with -1.
template <typename Scalar>
Scalar lifted(std::span<const Scalar> ys_sorted, std::ptrdiff_t index) {
  const auto n = static_cast<std::ptrdiff_t>(ys_sorted.size());
  const std::ptrdiff_t turns = floor_div(index, n);
  return ys_sorted[static_cast<std::size_t>(index - turns * n)] + static_cast<Scalar>(turns);
}

template <typename Scalar>
Scalar shifted_cost(std::span<const Scalar> xs_sorted, std::span<const Scalar> ys_sorted, std::ptrdiff_t shift) {
  Scalar total = 0;
  const auto n = static_cast<std::ptrdiff_t>(xs_sorted.size());
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const Scalar d = xs_sorted[static_cast<std::size_t>(i)] - lifted(ys_sorted, i + shift);
    total += d * d;
  }
  return total / static_cast<Scalar>(n);
}

}  // namespace detail

/// Optimal cyclic matching between two sorted circle samples: x_(i) is paired
/// with the lifted y_(i + shift).
template <typename Scalar>
struct CircleMatching {
  std::ptrdiff_t shift = 0;
  Scalar cost = 0;
};

/// Circular W_2^2 for sorted inputs.
///
/// The transport cost as a function of the quantile rotation alpha in [-1, 1]
/// is convex and piecewise linear with breakpoints at multiples of 1/n, so the
/// optimum sits on a lattice shift. The search bisects on the sign of the
/// slope; once the bracket collapses to a single lattice point no further
/// iteration can move it, so the loop usually stops well before the 60-step cap.
/// Ties resolve to the smallest shift.
template <typename Scalar>
CircleMatching<Scalar> circle_w2_sorted(std::span<const Scalar> xs_sorted, std::span<const Scalar> ys_sorted) {
  if (xs_sorted.size() != ys_sorted.size()) throw DataError("circle_w2: sample sizes differ");
  if (xs_sorted.empty()) throw DataError("circle_w2: empty sample");
  // The search always runs on a canonical ordering of the pair so that the
  // cost is bitwise symmetric in its arguments.
  if (std::lexicographical_compare(ys_sorted.begin(), ys_sorted.end(), xs_sorted.begin(), xs_sorted.end())) {
    const auto swapped = circle_w2_sorted(ys_sorted, xs_sorted);
    return {-swapped.shift, swapped.cost};
  }
  const auto n = static_cast<std::ptrdiff_t>(xs_sorted.size());
  std::ptrdiff_t lo = -n, hi = n;
  for (int iter = 0; iter < 60 && lo < hi; ++iter) {
    const std::ptrdiff_t cell = detail::floor_div(lo + hi, 2);
    const Scalar slope = detail::shifted_cost(xs_sorted, ys_sorted, cell + 1) -
                         detail::shifted_cost(xs_sorted, ys_sorted, cell);
    if (slope < Scalar(0))
      lo = cell + 1;
    else
      hi = cell;
  }
  return {lo, detail::shifted_cost(xs_sorted, ys_sorted, lo)};
}

template <typename Scalar>
Scalar circle_w2(const CircleSample<Scalar>& a, const CircleSample<Scalar>& b) {
  if (a.angles.size() != b.angles.size()) throw DataError("circle_w2: sample sizes differ");
  std::vector<Scalar> xs = a.angles, ys = b.angles;
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  return circle_w2_sorted<Scalar>(xs, ys).cost;
}

/// Exhaustive reference: every cyclic assignment k in [0, n) combined with an
/// integer global offset m in [-2, 2]. Quadratic in n; for validation only.
template <typename Scalar>
Scalar circle_w2_bruteforce(const CircleSample<Scalar>& a, const CircleSample<Scalar>& b) {
  if (a.angles.size() != b.angles.size()) throw DataError("circle_w2_bruteforce: sample sizes differ");
  const std::size_t n = a.angles.size();
  if (n == 0) throw DataError("circle_w2_bruteforce: empty sample");
  if (n > 512) throw DataError("circle_w2_bruteforce: n > 512 is beyond oracle scale");
  std::vector<Scalar> xs = a.angles, ys = b.angles;
  std::sort(xs.begin(), xs.end());
  std::sort(ys.begin(), ys.end());
  Scalar best = std::numeric_limits<Scalar>::infinity();
  for (std::size_t k = 0; k < n; ++k) {
    for (int m = -2; m <= 2; ++m) {
      Scalar total = 0;
      for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = i + k;
        const Scalar y = j < n ? ys[j] : ys[j - n] + Scalar(1);
        const Scalar d = xs[i] - (y + static_cast<Scalar>(m));
        total += d * d;
      }
      best = std::min(best, total / static_cast<Scalar>(n));
    }
  }
  return best;
}

/// Orthonormal basis of a uniformly random 2-plane: Gram-Schmidt on two
/// independent standard Gaussian vectors, redrawn if degenerate.
ProjectionPlane<double> sample_great_circle_plane(Eigen::Index dim, RngStream& rng);

/// `count` planes packed as a dim x (2*count) matrix [u1_0 u2_0 u1_1 u2_1 ...].
/// Plane i is drawn from stream.split(i), independent of the others.
Eigen::MatrixXd sample_planes(Eigen::Index dim, Eigen::Index count, const RngStream& stream);

/// `count` uniform unit directions as columns of a dim x count matrix;
/// direction i is drawn from stream.split(i).
Eigen::MatrixXd sample_directions(Eigen::Index dim, Eigen::Index count, const RngStream& stream);

struct SlicedEstimate {
  double value = 0;
  Eigen::MatrixXd grad_x;  ///< d value / d X with the optimal matchings held fixed
};

/// Monte-Carlo SSW_2^2 over the given packed planes. Rows of X and Y are unit
/// vectors. Per-plane costs are summed in plane order regardless of `workers`.
SlicedEstimate ssw2_with_planes(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const Eigen::MatrixXd& planes,
                                int workers = 1);

/// SSW_2^2 estimate from `projections` planes drawn from `rng`.
double ssw2(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, Eigen::Index projections, const RngStream& rng,
            int workers = 1);

/// Monte-Carlo SW_2^2 over the given direction columns.
SlicedEstimate sliced_w2_with_directions(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                                         const Eigen::MatrixXd& directions, int workers = 1);

double sliced_w2(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, Eigen::Index projections, const RngStream& rng,
                 int workers = 1);

}  // namespace s2wtm::ot
