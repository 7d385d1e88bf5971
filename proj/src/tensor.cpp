#include "s2wtm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <span>
#include <sstream>

#include "s2wtm/parallel.hpp"
#include "s2wtm/spherical_ot.hpp"

namespace s2wtm {

Tensor Tensor::scalar(double v) {
  Tensor t;
  t.values = Eigen::MatrixXd::Constant(1, 1, v);
  return t;
}

Tensor Tensor::vector(const Eigen::VectorXd& v) {
  Tensor t;
  t.shape = {static_cast<std::uint64_t>(v.size())};
  t.values = v.transpose();
  return t;
}

Tensor Tensor::matrix(Eigen::MatrixXd m) {
  Tensor t;
  t.shape = {static_cast<std::uint64_t>(m.rows()), static_cast<std::uint64_t>(m.cols())};
  t.values = std::move(m);
  return t;
}

std::uint64_t Tensor::size() const {
  return std::accumulate(shape.begin(), shape.end(), std::uint64_t{1}, std::multiplies<>());
}

namespace {

std::string shape_str(const Eigen::MatrixXd& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

[[noreturn]] void shape_error(const char* op, const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  throw DataError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

void same_graph(Var a, Var b) {
  if (a.graph == nullptr || a.graph != b.graph) throw DataError("operands belong to different graphs");
}

}  // namespace

Var Graph::add_node(OpKind kind, std::vector<std::size_t> inputs, double scalar) {
  Node n;
  n.kind = kind;
  n.scalar = scalar;
  for (std::size_t in : inputs) {
    if (in >= nodes_.size()) throw DataError("graph: input node does not exist");
    n.needs_grad = n.needs_grad || nodes_[in].needs_grad;
  }
  n.inputs = std::move(inputs);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Graph::input(std::string name, bool differentiable) {
  Var v = add_node(OpKind::Input, {});
  nodes_[v.id].name = std::move(name);
  nodes_[v.id].needs_grad = differentiable;
  return v;
}

Var Graph::parameter(std::string name, Eigen::MatrixXd init) {
  Var v = add_node(OpKind::Parameter, {});
  nodes_[v.id].name = std::move(name);
  nodes_[v.id].needs_grad = true;
  nodes_[v.id].value = std::move(init);
  return v;
}

const Graph::Node& Graph::node(Var v) const {
  if (v.graph != this || v.id >= nodes_.size()) throw DataError("graph: foreign or invalid node handle");
  return nodes_[v.id];
}

const Eigen::MatrixXd& Graph::value(Var v) const { return node(v).value; }
const Eigen::MatrixXd& Graph::grad(Var v) const { return node(v).grad; }

Eigen::MatrixXd& Graph::parameter_value(Var v) {
  node(v);
  if (nodes_[v.id].kind != OpKind::Parameter) throw DataError("graph: node is not a parameter");
  return nodes_[v.id].value;
}

std::vector<Var> Graph::parameters() {
  std::vector<Var> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (nodes_[i].kind == OpKind::Parameter) out.push_back({this, i});
  return out;
}

std::string_view Graph::name(Var v) const { return node(v).name; }

void Graph::forward(const Bindings& inputs, const ForwardOptions& options) {
  if (options.mode == Mode::Train && options.rng == nullptr && !options.reuse_context) {
    for (const Node& n : nodes_)
      if (n.kind == OpKind::Dropout && n.scalar > 0.0) throw DataError("forward: train mode needs an rng stream");
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) eval_node(i, inputs, options);
  evaluated_ = true;
}

void Graph::eval_node(std::size_t id, const Bindings& inputs, const ForwardOptions& options) {
  Node& n = nodes_[id];
  auto in = [&](std::size_t k) -> const Eigen::MatrixXd& { return nodes_[n.inputs[k]].value; };
  switch (n.kind) {
    case OpKind::Input: {
      auto it = inputs.find(n.name);
      if (it == inputs.end()) throw DataError("forward: unbound input '" + n.name + "'");
      n.value = it->second;
      break;
    }
    case OpKind::Parameter:
      break;
    case OpKind::MatMul:
      if (in(0).cols() != in(1).rows()) shape_error("matmul", in(0), in(1));
      n.value.noalias() = in(0) * in(1);
      break;
    case OpKind::AddBias:
      if (in(1).rows() != 1 || in(1).cols() != in(0).cols()) shape_error("add_bias", in(0), in(1));
      n.value = in(0).rowwise() + in(1).row(0);
      break;
    case OpKind::Add:
      if (in(0).rows() != in(1).rows() || in(0).cols() != in(1).cols()) shape_error("add", in(0), in(1));
      n.value = in(0) + in(1);
      break;
    case OpKind::Mul:
      if (in(0).rows() != in(1).rows() || in(0).cols() != in(1).cols()) shape_error("mul", in(0), in(1));
      n.value = in(0).cwiseProduct(in(1));
      break;
    case OpKind::Scale:
      n.value = n.scalar * in(0);
      break;
    case OpKind::Relu:
      n.value = in(0).cwiseMax(0.0);
      break;
    case OpKind::Dropout: {
      const double p = n.scalar;
      if (options.mode == Mode::Eval || p == 0.0) {
        n.value = in(0);
        n.mask.resize(0, 0);
        break;
      }
      const bool reuse = options.reuse_context && n.has_context && n.mask.rows() == in(0).rows() &&
                         n.mask.cols() == in(0).cols();
      if (!reuse) {
        if (options.rng == nullptr) throw DataError("dropout: no saved mask and no rng stream");
        RngStream stream = options.rng->split(static_cast<std::uint64_t>(id));
        n.mask.resize(in(0).rows(), in(0).cols());
        const double keep = 1.0 / (1.0 - p);
        for (Eigen::Index c = 0; c < n.mask.cols(); ++c)
          for (Eigen::Index r = 0; r < n.mask.rows(); ++r) n.mask(r, c) = stream.uniform() < p ? 0.0 : keep;
        n.has_context = true;
      }
      n.value = in(0).cwiseProduct(n.mask);
      break;
    }
    case OpKind::Softmax: {
      n.value.resize(in(0).rows(), in(0).cols());
      for (Eigen::Index r = 0; r < in(0).rows(); ++r) {
        const double mx = in(0).row(r).maxCoeff();
        n.value.row(r) = (in(0).row(r).array() - mx).exp().matrix();
        n.value.row(r) /= n.value.row(r).sum();
      }
      break;
    }
    case OpKind::Log:
      n.value = in(0).array().log().matrix();
      break;
    case OpKind::Sum:
      n.value = Eigen::MatrixXd::Constant(1, 1, in(0).sum());
      break;
    case OpKind::L2Normalize: {
      n.value.resize(in(0).rows(), in(0).cols());
      for (Eigen::Index r = 0; r < in(0).rows(); ++r) {
        const double norm = in(0).row(r).norm();
        if (!(norm > 0.0)) throw NumericError("l2_normalize: zero row");
        n.value.row(r) = in(0).row(r) / norm;
      }
      break;
    }
    case OpKind::CrossEntropy: {
      if (in(0).rows() != in(1).rows() || in(0).cols() != in(1).cols()) shape_error("cross_entropy", in(0), in(1));
      double total = 0.0;
      for (Eigen::Index c = 0; c < in(0).cols(); ++c)
        for (Eigen::Index r = 0; r < in(0).rows(); ++r) {
          const double t = in(0)(r, c);
          if (t != 0.0) total -= t * std::log(in(1)(r, c));
        }
      n.value = Eigen::MatrixXd::Constant(1, 1, total / static_cast<double>(in(0).rows()));
      break;
    }
    case OpKind::CircleAngles: {
      const Eigen::MatrixXd& pts = in(0);
      const Eigen::MatrixXd& planes = in(1);
      if (pts.cols() != planes.rows() || planes.cols() % 2 != 0) shape_error("circle_angles", pts, planes);
      const Eigen::MatrixXd coords = pts * planes;
      const Eigen::Index m = planes.cols() / 2;
      n.value.resize(pts.rows(), m);
      parallel_for(m, options.workers, [&](std::ptrdiff_t j) {
        for (Eigen::Index r = 0; r < pts.rows(); ++r)
          n.value(r, j) = ot::circle_coordinate(coords(r, 2 * j), coords(r, 2 * j + 1));
      });
      break;
    }
    case OpKind::SortColumns: {
      const Eigen::MatrixXd& a = in(0);
      const bool reuse = options.reuse_context && n.has_context && n.permutation.rows() == a.rows() &&
                         n.permutation.cols() == a.cols();
      if (!reuse) {
        n.permutation.resize(a.rows(), a.cols());
        parallel_for(a.cols(), options.workers, [&](std::ptrdiff_t c) {
          std::vector<int> idx(static_cast<std::size_t>(a.rows()));
          std::iota(idx.begin(), idx.end(), 0);
          std::stable_sort(idx.begin(), idx.end(), [&](int x, int y) { return a(x, c) < a(y, c); });
          for (Eigen::Index r = 0; r < a.rows(); ++r) n.permutation(r, c) = idx[static_cast<std::size_t>(r)];
        });
        n.has_context = true;
      }
      n.value.resize(a.rows(), a.cols());
      for (Eigen::Index c = 0; c < a.cols(); ++c)
        for (Eigen::Index r = 0; r < a.rows(); ++r) n.value(r, c) = a(n.permutation(r, c), c);
      break;
    }
    case OpKind::SquaredDiffMean: {
      if (in(0).rows() != in(1).rows() || in(0).cols() != in(1).cols())
        shape_error("squared_diff_mean", in(0), in(1));
      // Column sums first, then a fixed-order sum over columns.
      double total = 0.0;
      for (Eigen::Index c = 0; c < in(0).cols(); ++c) total += (in(0).col(c) - in(1).col(c)).squaredNorm();
      n.value = Eigen::MatrixXd::Constant(1, 1, total / static_cast<double>(in(0).size()));
      break;
    }
    case OpKind::CircularW2Cost: {
      const Eigen::MatrixXd& xs = in(0);
      const Eigen::MatrixXd& ys = in(1);
      if (xs.rows() != ys.rows() || xs.cols() != ys.cols()) shape_error("circular_w2_cost", xs, ys);
      const auto rows = static_cast<std::size_t>(xs.rows());
      const bool reuse =
          options.reuse_context && n.has_context && n.shifts.size() == static_cast<std::size_t>(xs.cols());
      std::vector<double> costs(static_cast<std::size_t>(xs.cols()));
      if (!reuse) n.shifts.assign(static_cast<std::size_t>(xs.cols()), 0);
      parallel_for(xs.cols(), options.workers, [&](std::ptrdiff_t c) {
        std::span<const double> cx(xs.col(c).data(), rows), cy(ys.col(c).data(), rows);
        if (reuse) {
          costs[static_cast<std::size_t>(c)] = ot::detail::shifted_cost(cx, cy, n.shifts[static_cast<std::size_t>(c)]);
        } else {
          const auto match = ot::circle_w2_sorted(cx, cy);
          n.shifts[static_cast<std::size_t>(c)] = match.shift;
          costs[static_cast<std::size_t>(c)] = match.cost;
        }
      });
      n.has_context = true;
      double total = 0.0;
      for (double c : costs) total += c;
      n.value = Eigen::MatrixXd::Constant(1, 1, total / static_cast<double>(xs.cols()));
      break;
    }
  }
}

void Graph::backward(Var loss) {
  const Node& l = node(loss);
  if (!evaluated_) throw DataError("backward: forward has not been run");
  if (l.value.rows() != 1 || l.value.cols() != 1) throw DataError("backward: loss is not a scalar");
  for (Node& n : nodes_) {
    if (n.needs_grad)
      n.grad = Eigen::MatrixXd::Zero(n.value.rows(), n.value.cols());
    else
      n.grad.resize(0, 0);
  }
  if (!l.needs_grad) return;
  nodes_[loss.id].grad(0, 0) = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;)
    if (nodes_[i].needs_grad) backprop_node(i);
}

void Graph::backprop_node(std::size_t id) {
  Node& n = nodes_[id];
  const Eigen::MatrixXd& g = n.grad;
  auto in = [&](std::size_t k) -> Node& { return nodes_[n.inputs[k]]; };
  auto wants = [&](std::size_t k) { return in(k).needs_grad; };
  switch (n.kind) {
    case OpKind::Input:
    case OpKind::Parameter:
      break;
    case OpKind::MatMul:
      if (wants(0)) in(0).grad.noalias() += g * in(1).value.transpose();
      if (wants(1)) in(1).grad.noalias() += in(0).value.transpose() * g;
      break;
    case OpKind::AddBias:
      if (wants(0)) in(0).grad += g;
      if (wants(1)) in(1).grad += g.colwise().sum();
      break;
    case OpKind::Add:
      if (wants(0)) in(0).grad += g;
      if (wants(1)) in(1).grad += g;
      break;
    case OpKind::Mul:
      if (wants(0)) in(0).grad += g.cwiseProduct(in(1).value);
      if (wants(1)) in(1).grad += g.cwiseProduct(in(0).value);
      break;
    case OpKind::Scale:
      in(0).grad += n.scalar * g;
      break;
    case OpKind::Relu:
      // Subgradient 0 at exactly 0.
      in(0).grad += (in(0).value.array() > 0.0).select(g, 0.0);
      break;
    case OpKind::Dropout:
      if (n.mask.size() == 0)
        in(0).grad += g;
      else
        in(0).grad += g.cwiseProduct(n.mask);
      break;
    case OpKind::Softmax: {
      const Eigen::MatrixXd& s = n.value;
      const Eigen::VectorXd dot = g.cwiseProduct(s).rowwise().sum();
      in(0).grad += s.cwiseProduct(g.colwise() - dot);
      break;
    }
    case OpKind::Log:
      in(0).grad += g.cwiseQuotient(in(0).value);
      break;
    case OpKind::Sum:
      in(0).grad.array() += g(0, 0);
      break;
    case OpKind::L2Normalize: {
      const Eigen::MatrixXd& y = n.value;
      for (Eigen::Index r = 0; r < y.rows(); ++r) {
        const double norm = in(0).value.row(r).norm();
        const double proj = y.row(r).dot(g.row(r));
        in(0).grad.row(r) += (g.row(r) - proj * y.row(r)) / norm;
      }
      break;
    }
    case OpKind::CrossEntropy: {
      const double scale = -g(0, 0) / static_cast<double>(in(0).value.rows());
      if (wants(1)) in(1).grad += scale * in(0).value.cwiseQuotient(in(1).value);
      if (wants(0)) in(0).grad += scale * in(1).value.array().log().matrix();
      break;
    }
    case OpKind::CircleAngles: {
      if (!wants(0)) break;
      const Eigen::MatrixXd& pts = in(0).value;
      const Eigen::MatrixXd& planes = in(1).value;
      const Eigen::MatrixXd coords = pts * planes;
      Eigen::MatrixXd coord_grad(coords.rows(), coords.cols());
      const double inv_two_pi = 1.0 / (2.0 * std::numbers::pi);
      for (Eigen::Index j = 0; j < g.cols(); ++j)
        for (Eigen::Index r = 0; r < g.rows(); ++r) {
          const double a = coords(r, 2 * j), b = coords(r, 2 * j + 1);
          const double r2 = a * a + b * b;
          if (std::sqrt(r2) < ot::kDegenerateInPlaneNorm) {
            coord_grad(r, 2 * j) = 0.0;
            coord_grad(r, 2 * j + 1) = 0.0;
            continue;
          }
          const double s = g(r, j) * inv_two_pi / r2;
          coord_grad(r, 2 * j) = -b * s;
          coord_grad(r, 2 * j + 1) = a * s;
        }
      in(0).grad.noalias() += coord_grad * planes.transpose();
      break;
    }
    case OpKind::SortColumns:
      for (Eigen::Index c = 0; c < g.cols(); ++c)
        for (Eigen::Index r = 0; r < g.rows(); ++r) in(0).grad(n.permutation(r, c), c) += g(r, c);
      break;
    case OpKind::SquaredDiffMean: {
      const Eigen::MatrixXd d = (in(0).value - in(1).value) * (2.0 * g(0, 0) / static_cast<double>(in(0).value.size()));
      if (wants(0)) in(0).grad += d;
      if (wants(1)) in(1).grad -= d;
      break;
    }
    case OpKind::CircularW2Cost: {
      const Eigen::MatrixXd& xs = in(0).value;
      const Eigen::MatrixXd& ys = in(1).value;
      const auto rows = static_cast<std::size_t>(xs.rows());
      const auto nrows = static_cast<std::ptrdiff_t>(rows);
      const double coef = 2.0 * g(0, 0) / (static_cast<double>(xs.rows()) * static_cast<double>(xs.cols()));
      for (Eigen::Index c = 0; c < xs.cols(); ++c) {
        std::span<const double> cy(ys.col(c).data(), rows);
        const std::ptrdiff_t shift = n.shifts[static_cast<std::size_t>(c)];
        for (std::ptrdiff_t r = 0; r < nrows; ++r) {
          const double d = coef * (xs(r, c) - ot::detail::lifted(cy, r + shift));
          if (wants(0)) in(0).grad(r, c) += d;
          if (wants(1)) {
            const std::ptrdiff_t j = r + shift;
            const std::ptrdiff_t k = j - ot::detail::floor_div(j, nrows) * nrows;
            in(1).grad(k, c) -= d;
          }
        }
      }
      break;
    }
  }
}

Var matmul(Var a, Var b) {
  same_graph(a, b);
  return a.graph->add_node(OpKind::MatMul, {a.id, b.id});
}
Var add_bias(Var a, Var bias) {
  same_graph(a, bias);
  return a.graph->add_node(OpKind::AddBias, {a.id, bias.id});
}
Var operator+(Var a, Var b) {
  same_graph(a, b);
  return a.graph->add_node(OpKind::Add, {a.id, b.id});
}
Var operator*(Var a, Var b) {
  same_graph(a, b);
  return a.graph->add_node(OpKind::Mul, {a.id, b.id});
}
Var scale(Var a, double factor) { return a.graph->add_node(OpKind::Scale, {a.id}, factor); }
Var relu(Var a) { return a.graph->add_node(OpKind::Relu, {a.id}); }
Var dropout(Var a, double p) {
  if (!(p >= 0.0 && p < 1.0)) throw ConfigError("dropout: p must lie in [0, 1)");
  return a.graph->add_node(OpKind::Dropout, {a.id}, p);
}
Var softmax(Var a) { return a.graph->add_node(OpKind::Softmax, {a.id}); }
Var log(Var a) { return a.graph->add_node(OpKind::Log, {a.id}); }
Var sum(Var a) { return a.graph->add_node(OpKind::Sum, {a.id}); }
Var l2_normalize(Var a) { return a.graph->add_node(OpKind::L2Normalize, {a.id}); }
Var cross_entropy(Var target, Var probs) {
  same_graph(target, probs);
  return target.graph->add_node(OpKind::CrossEntropy, {target.id, probs.id});
}
Var circle_angles(Var points, Var planes) {
  same_graph(points, planes);
  return points.graph->add_node(OpKind::CircleAngles, {points.id, planes.id});
}
Var sort_columns(Var a) { return a.graph->add_node(OpKind::SortColumns, {a.id}); }
Var squared_diff_mean(Var a, Var b) {
  same_graph(a, b);
  return a.graph->add_node(OpKind::SquaredDiffMean, {a.id, b.id});
}
Var circular_w2_cost(Var sorted_x, Var sorted_y) {
  same_graph(sorted_x, sorted_y);
  return sorted_x.graph->add_node(OpKind::CircularW2Cost, {sorted_x.id, sorted_y.id});
}

void adam_step(std::vector<Eigen::MatrixXd*> params, const std::vector<const Eigen::MatrixXd*>& grads,
               AdamState& state) {
  if (params.size() != grads.size()) throw DataError("adam_step: parameter and gradient counts differ");
  if (state.first_moment.empty()) {
    for (const Eigen::MatrixXd* p : params) {
      state.first_moment.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
      state.second_moment.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
    }
  }
  if (state.first_moment.size() != params.size()) throw DataError("adam_step: state does not match parameters");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& p = *params[i];
    const auto& g = *grads[i];
    if (p.rows() != g.rows() || p.cols() != g.cols() || state.first_moment[i].rows() != p.rows() ||
        state.first_moment[i].cols() != p.cols())
      throw DataError("adam_step: shape mismatch for parameter " + std::to_string(i));
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& m = state.first_moment[i];
    auto& v = state.second_moment[i];
    const auto& g = *grads[i];
    m = state.beta1 * m + (1.0 - state.beta1) * g;
    v = state.beta2 * v + (1.0 - state.beta2) * g.cwiseAbs2();
    params[i]->array() -=
        state.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + state.epsilon);
  }
}

}  // namespace s2wtm
