#include "s2wtm/spherical_ot.hpp"

#include "s2wtm/parallel.hpp"

namespace s2wtm::ot {

namespace {

std::vector<Eigen::Index> sorted_order(const Eigen::VectorXd& v) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(v.size()));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  std::stable_sort(idx.begin(), idx.end(), [&](Eigen::Index a, Eigen::Index b) { return v(a) < v(b); });
  return idx;
}

void check_pair(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  if (x.rows() != y.rows()) throw DataError("sliced estimator: sample counts differ");
  if (x.cols() != y.cols()) throw DataError("sliced estimator: dimensions differ");
  if (x.rows() < 1) throw DataError("sliced estimator: empty sample");
}

}  // namespace

ProjectionPlane<double> sample_great_circle_plane(Eigen::Index dim, RngStream& rng) {
  if (dim < 2) throw DataError("sample_great_circle_plane: dim must be >= 2");
  for (int attempt = 0; attempt < 100; ++attempt) {
    Eigen::VectorXd a(dim), b(dim);
    for (Eigen::Index i = 0; i < dim; ++i) a(i) = rng.normal();
    for (Eigen::Index i = 0; i < dim; ++i) b(i) = rng.normal();
    const double na = a.norm();
    if (na < 1e-10) continue;
    a /= na;
    b -= a.dot(b) * a;
    const double nb = b.norm();
    if (nb < 1e-10) continue;
    b /= nb;
    // Second pass of Gram-Schmidt keeps U^T U = I to machine precision.
    b -= a.dot(b) * a;
    b.normalize();
    ProjectionPlane<double> plane;
    plane.basis.resize(dim, 2);
    plane.basis.col(0) = a;
    plane.basis.col(1) = b;
    return plane;
  }
  throw NumericError("sample_great_circle_plane: degenerate Gaussian draws after 100 retries");
}

Eigen::MatrixXd sample_planes(Eigen::Index dim, Eigen::Index count, const RngStream& stream) {
  if (count < 1) throw DataError("sample_planes: need at least one projection");
  Eigen::MatrixXd planes(dim, 2 * count);
  for (Eigen::Index i = 0; i < count; ++i) {
    RngStream sub = stream.split(static_cast<std::uint64_t>(i));
    planes.middleCols(2 * i, 2) = sample_great_circle_plane(dim, sub).basis;
  }
  return planes;
}

Eigen::MatrixXd sample_directions(Eigen::Index dim, Eigen::Index count, const RngStream& stream) {
  if (dim < 1) throw DataError("sample_directions: dim must be >= 1");
  if (count < 1) throw DataError("sample_directions: need at least one projection");
  Eigen::MatrixXd dirs(dim, count);
  for (Eigen::Index i = 0; i < count; ++i) {
    RngStream sub = stream.split(static_cast<std::uint64_t>(i));
    for (int attempt = 0;; ++attempt) {
      for (Eigen::Index r = 0; r < dim; ++r) dirs(r, i) = sub.normal();
      const double n = dirs.col(i).norm();
      if (n > 1e-10) {
        dirs.col(i) /= n;
        break;
      }
      if (attempt >= 100) throw NumericError("sample_directions: degenerate Gaussian draws");
    }
  }
  return dirs;
}

SlicedEstimate ssw2_with_planes(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, const Eigen::MatrixXd& planes,
                                int workers) {
  check_pair(x, y);
  if (planes.rows() != x.cols() || planes.cols() < 2 || planes.cols() % 2 != 0)
    throw DataError("ssw2: planes must be dim x 2M");
  const Eigen::Index n = x.rows();
  const Eigen::Index count = planes.cols() / 2;
  const Eigen::MatrixXd px = x * planes;
  const Eigen::MatrixXd py = y * planes;

  std::vector<double> costs(static_cast<std::size_t>(count));
  // Per point, per plane: d cost / d angle, and d angle / d (a, b).
  Eigen::MatrixXd coord_grad = Eigen::MatrixXd::Zero(n, 2 * count);

  parallel_for(count, workers, [&](std::ptrdiff_t j) {
    Eigen::VectorXd ax(n), ay(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      ax(i) = circle_coordinate(px(i, 2 * j), px(i, 2 * j + 1));
      ay(i) = circle_coordinate(py(i, 2 * j), py(i, 2 * j + 1));
    }
    const auto ox = sorted_order(ax);
    const auto oy = sorted_order(ay);
    std::vector<double> xs(static_cast<std::size_t>(n)), ys(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
      xs[static_cast<std::size_t>(i)] = ax(ox[static_cast<std::size_t>(i)]);
      ys[static_cast<std::size_t>(i)] = ay(oy[static_cast<std::size_t>(i)]);
    }
    const auto match = circle_w2_sorted<double>(xs, ys);
    costs[static_cast<std::size_t>(j)] = match.cost;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = xs[static_cast<std::size_t>(i)] - detail::lifted<double>(ys, i + match.shift);
      const Eigen::Index row = ox[static_cast<std::size_t>(i)];
      const double a = px(row, 2 * j), b = px(row, 2 * j + 1);
      const double r2 = a * a + b * b;
      if (std::sqrt(r2) < kDegenerateInPlaneNorm) continue;
      const double dangle = 2.0 * d / static_cast<double>(n);
      const double scale = dangle / (2.0 * std::numbers::pi * r2);
      coord_grad(row, 2 * j) = -b * scale;
      coord_grad(row, 2 * j + 1) = a * scale;
    }
  });

  SlicedEstimate out;
  double total = 0;
  for (double c : costs) total += c;
  out.value = total / static_cast<double>(count);
  out.grad_x = (coord_grad * planes.transpose()) / static_cast<double>(count);
  return out;
}

double ssw2(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, Eigen::Index projections, const RngStream& rng,
            int workers) {
  if (projections < 1) throw DataError("ssw2: projection count must be >= 1");
  check_pair(x, y);
  return ssw2_with_planes(x, y, sample_planes(x.cols(), projections, rng), workers).value;
}

SlicedEstimate sliced_w2_with_directions(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y,
                                         const Eigen::MatrixXd& directions, int workers) {
  check_pair(x, y);
  if (directions.rows() != x.cols() || directions.cols() < 1) throw DataError("sliced_w2: directions must be dim x M");
  const Eigen::Index n = x.rows();
  const Eigen::Index count = directions.cols();
  const Eigen::MatrixXd px = x * directions;
  const Eigen::MatrixXd py = y * directions;
  std::vector<double> costs(static_cast<std::size_t>(count));
  Eigen::MatrixXd proj_grad = Eigen::MatrixXd::Zero(n, count);

  parallel_for(count, workers, [&](std::ptrdiff_t j) {
    const Eigen::VectorXd cx = px.col(j), cy = py.col(j);
    const auto ox = sorted_order(cx);
    const auto oy = sorted_order(cy);
    double total = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double d = cx(ox[static_cast<std::size_t>(i)]) - cy(oy[static_cast<std::size_t>(i)]);
      total += d * d;
      proj_grad(ox[static_cast<std::size_t>(i)], j) = 2.0 * d / static_cast<double>(n);
    }
    costs[static_cast<std::size_t>(j)] = total / static_cast<double>(n);
  });

  SlicedEstimate out;
  double total = 0;
  for (double c : costs) total += c;
  out.value = total / static_cast<double>(count);
  out.grad_x = (proj_grad * directions.transpose()) / static_cast<double>(count);
  return out;
}

double sliced_w2(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y, Eigen::Index projections, const RngStream& rng,
                 int workers) {
  if (projections < 1) throw DataError("sliced_w2: projection count must be >= 1");
  check_pair(x, y);
  return sliced_w2_with_directions(x, y, sample_directions(x.cols(), projections, rng), workers).value;
}

}  // namespace s2wtm::ot
