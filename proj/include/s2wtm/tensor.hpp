#pragma once

// Minimal reverse-mode differentiation over dense matrices.
//
// A Graph is built once (inputs, parameters, and a fixed chain of primitive
// ops) and then evaluated many times with fresh input bindings. Each forward
// pass records the per-op context it needs for the backward pass (dropout
// masks, sort permutations, circular matching shifts); a forward pass with
// `reuse_context` replays those contexts instead of drawing new ones.

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "s2wtm/errors.hpp"
#include "s2wtm/rng.hpp"

namespace s2wtm {

/// Dense value with an explicit shape (rank 0, 1 or 2). Values are held in an
/// Eigen matrix; rank-1 tensors are stored as a single row.
struct Tensor {
  std::vector<std::uint64_t> shape;
  Eigen::MatrixXd values;

  static Tensor scalar(double v);
  static Tensor vector(const Eigen::VectorXd& v);
  static Tensor matrix(Eigen::MatrixXd m);

  std::size_t rank() const { return shape.size(); }
  std::uint64_t size() const;
};

enum class Mode { Train, Eval };

enum class OpKind {
  Input,
  Parameter,
  MatMul,
  AddBias,
  Add,
  Mul,
  Scale,
  Relu,
  Dropout,
  Softmax,
  Log,
  Sum,
  L2Normalize,
  CrossEntropy,
  CircleAngles,
  SortColumns,
  SquaredDiffMean,
  CircularW2Cost,
};

class Graph;

/// Handle to a node of a Graph.
struct Var {
  Graph* graph = nullptr;
  std::size_t id = 0;
};

struct ForwardOptions {
  Mode mode = Mode::Eval;
  /// Source of dropout masks in train mode; dropout node i draws from rng->split(i).
  const RngStream* rng = nullptr;
  /// Replay dropout masks, sort permutations and matching shifts from the previous pass.
  bool reuse_context = false;
  /// Column-parallel kernels (projection ops) may use this many threads.
  int workers = 1;
};

using Bindings = std::map<std::string, Eigen::MatrixXd, std::less<>>;

class Graph {
 public:
  Var input(std::string name, bool differentiable = false);
  Var parameter(std::string name, Eigen::MatrixXd init);

  /// Evaluates every node in insertion order.
  void forward(const Bindings& inputs, const ForwardOptions& options);
  /// Populates grad for every node that depends on a parameter or a
  /// differentiable input. `loss` must be a 1x1 node.
  void backward(Var loss);

  const Eigen::MatrixXd& value(Var v) const;
  const Eigen::MatrixXd& grad(Var v) const;
  Eigen::MatrixXd& parameter_value(Var v);

  std::vector<Var> parameters();
  std::string_view name(Var v) const;
  std::size_t size() const { return nodes_.size(); }

  // Builders used by the free functions below.
  Var add_node(OpKind kind, std::vector<std::size_t> inputs, double scalar = 0.0);

 private:
  struct Node {
    OpKind kind;
    std::vector<std::size_t> inputs;
    double scalar = 0.0;
    std::string name;
    bool needs_grad = false;
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;
    // Saved contexts.
    Eigen::MatrixXd mask;
    Eigen::MatrixXi permutation;
    std::vector<std::ptrdiff_t> shifts;
    bool has_context = false;
  };

  void eval_node(std::size_t id, const Bindings& inputs, const ForwardOptions& options);
  void backprop_node(std::size_t id);
  const Node& node(Var v) const;

  std::vector<Node> nodes_;
  bool evaluated_ = false;
};

// Primitive ops. All operands must belong to the same graph.

/// A (n x k) * B (k x m).
Var matmul(Var a, Var b);
/// Adds a 1 x m bias row to every row of an n x m matrix.
Var add_bias(Var a, Var bias);
Var operator+(Var a, Var b);
/// Elementwise product.
Var operator*(Var a, Var b);
Var scale(Var a, double factor);
Var relu(Var a);
/// Inverted dropout with drop probability p; identity in eval mode.
Var dropout(Var a, double p);
/// Row-wise softmax.
Var softmax(Var a);
Var log(Var a);
/// Sum of all entries, as a 1x1 node.
Var sum(Var a);
/// Row-wise L2 normalization onto the unit sphere.
Var l2_normalize(Var a);
/// -(1/n) sum_{r,c} target(r,c) * log(probs(r,c)); `target` receives no gradient.
Var cross_entropy(Var target, Var probs);
/// Points (n x d) against packed planes (d x 2M): n x M circle coordinates in [0, 1).
/// The planes receive no gradient.
Var circle_angles(Var points, Var planes);
/// Sorts every column ascending (stable); the permutation is saved for backward.
Var sort_columns(Var a);
/// (1 / (n m)) sum (a - b)^2 over two n x m matrices.
Var squared_diff_mean(Var a, Var b);
/// Mean over columns of the circular W_2^2 between column-sorted circle samples.
Var circular_w2_cost(Var sorted_x, Var sorted_y);

/// Adam moments for a fixed list of parameter tensors.
struct AdamState {
  double learning_rate = 2e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::int64_t step = 0;
  std::vector<Eigen::MatrixXd> first_moment;
  std::vector<Eigen::MatrixXd> second_moment;
};

/// One bias-corrected Adam update applied in place. Moments are created as
/// zeros on the first call.
void adam_step(std::vector<Eigen::MatrixXd*> params, const std::vector<const Eigen::MatrixXd*>& grads,
               AdamState& state);

}  // namespace s2wtm
