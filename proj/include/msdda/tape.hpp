// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "msdda/nn.hpp"

namespace msdda {

class Tape;

/// Handle to a matrix-valued node on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;
};

/// Reverse-mode differentiation over a fixed set of matrix operations.
/// Nodes are recorded in evaluation order; backward() walks them in reverse.
/// Column j of a batch matrix is one example.
class Tape {
 public:
  Var constant(Eigen::MatrixXd value);
  Var parameter(Eigen::MatrixXd value);

  const Eigen::MatrixXd& value(Var v) const { return nodes_[v.id].value; }
  /// Gradient of the last backward() target with respect to v (zero if v
  /// did not influence it).
  Eigen::MatrixXd grad(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  /// Throws ParameterError unless `loss` is a 1x1 node.
  void backward(Var loss);

  std::size_t size() const { return nodes_.size(); }

  // Recording interface used by the operations below.
  using Backward = std::function<void(Tape&, const Eigen::MatrixXd& out_value,
                                      const Eigen::MatrixXd& out_grad)>;
  Var record(Eigen::MatrixXd value, std::vector<Var> inputs, Backward backward);
  void accumulate(Var v, const Eigen::MatrixXd& g);

 private:
  struct Node {
    Eigen::MatrixXd value;
    Eigen::MatrixXd grad;
    bool requires_grad = false;
    bool has_grad = false;
    Backward backward;
  };
  std::vector<Node> nodes_;
};

Var matmul(Var a, Var b);
/// y + b broadcast over columns; b is a column vector.
Var add_bias(Var y, Var b);
Var operator+(Var a, Var b);
Var operator-(Var a, Var b);
Var operator*(double c, Var a);
Var tanh(Var a);
Var silu(Var a);
/// 1 x B row of per-column squared Euclidean norms.
Var colwise_squared_norm(Var a);
/// Elementwise product with a constant matrix of the same shape.
Var scale_elementwise(Var a, const Eigen::MatrixXd& c);
/// Numerically stable log(sigmoid(a)) elementwise.
Var log_sigmoid(Var a);
Var sum(Var a);
Var mean(Var a);

/// Parameter leaves for one network recorded on a tape.
struct MlpTapeParams {
  std::vector<Var> weights;
  std::vector<Var> biases;
  MlpArchitecture arch;
  bool trainable = false;
};

/// Records the network's parameters as leaves (trainable) or constants.
MlpTapeParams record_params(Tape& tape, const MlpParams& params, bool trainable);
/// Batched forward: inputs is in_dim x B, output is data_dim x B.
Var mlp_forward(Tape& tape, const MlpTapeParams& params, Var inputs);
/// Collects gradients of the leaves back into the flat parameter layout.
Eigen::VectorXd flat_grad(const Tape& tape, const MlpTapeParams& params);

/// Convenience: concatenated network inputs [x; embedding(t)] for a batch.
Eigen::MatrixXd network_inputs(const Eigen::MatrixXd& x, const std::vector<int>& t, int T,
                               int t_embed_dim);

}  // namespace msdda
