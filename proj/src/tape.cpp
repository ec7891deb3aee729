// SPDX-License-Identifier: Apache-2.0
#include "msdda/tape.hpp"

#include <cmath>

#include "msdda/errors.hpp"

namespace msdda {

Var Tape::constant(Eigen::MatrixXd value) { return record(std::move(value), {}, nullptr); }

Var Tape::parameter(Eigen::MatrixXd value) {
  Var v = record(std::move(value), {}, nullptr);
  nodes_[v.id].requires_grad = true;
  return v;
}

Var Tape::record(Eigen::MatrixXd value, std::vector<Var> inputs, Backward backward) {
  Node node;
  node.value = std::move(value);
  for (Var in : inputs) node.requires_grad = node.requires_grad || nodes_[in.id].requires_grad;
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

void Tape::accumulate(Var v, const Eigen::MatrixXd& g) {
  Node& n = nodes_[v.id];
  if (!n.requires_grad) return;
  if (!n.has_grad) {
    n.grad = g;
    n.has_grad = true;
  } else {
    n.grad += g;
  }
}

Eigen::MatrixXd Tape::grad(Var v) const {
  const Node& n = nodes_[v.id];
  if (!n.has_grad) return Eigen::MatrixXd::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape != this || loss.id >= nodes_.size())
    throw ParameterError("backward: variable does not belong to this tape");
  const Node& target = nodes_[loss.id];
  if (target.value.rows() != 1 || target.value.cols() != 1)
    throw ParameterError("backward: tape not finalized to a scalar (loss is " +
                         std::to_string(target.value.rows()) + "x" +
                         std::to_string(target.value.cols()) + ")");
  for (Node& n : nodes_) {
    n.has_grad = false;
    n.grad.resize(0, 0);
  }
  if (!target.requires_grad) return;
  accumulate(loss, Eigen::MatrixXd::Ones(1, 1));
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad || !n.backward) continue;
    n.backward(*this, n.value, n.grad);
  }
}

namespace {

void require_same_shape(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ParameterError(std::string(op) + ": shape mismatch");
}

}  // namespace

Var matmul(Var a, Var b) {
  Tape& tape = *a.tape;
  const Eigen::MatrixXd& A = tape.value(a);
  const Eigen::MatrixXd& B = tape.value(b);
  if (A.cols() != B.rows()) throw ParameterError("matmul: inner dimension mismatch");
  Eigen::MatrixXd out = A * B;
  return tape.record(std::move(out), {a, b},
                     [a, b](Tape& t, const Eigen::MatrixXd&, const Eigen::MatrixXd& g) {
                       if (t.requires_grad(a)) t.accumulate(a, g * t.value(b).transpose());
                       if (t.requires_grad(b)) t.accumulate(b, t.value(a).transpose() * g);
                     });
}

Var add_bias(Var y, Var b) {
  Tape& tape = *y.tape;
  const Eigen::MatrixXd& Y = tape.value(y);
  const Eigen::MatrixXd& B = tape.value(b);
  if (B.cols() != 1 || B.rows() != Y.rows()) throw ParameterError("add_bias: shape mismatch");
  Eigen::MatrixXd out = Y.colwise() + B.col(0);
  return tape.record(std::move(out), {y, b},
                     [y, b](Tape& t, const Eigen::MatrixXd&, const Eigen::MatrixXd& g) {
                       t.accumulate(y, g);
                       if (t.requires_grad(b)) t.accumulate(b, g.rowwise().sum());
                     });
}

Var operator+(Var a, Var b) {
  Tape& tape = *a.tape;
  require_same_shape(tape.value(a), tape.value(b), "add");
  Eigen::MatrixXd out = tape.value(a) + tape.value(b);
  return tape.record(std::move(out), {a, b},
                     [a, b](Tape& t, const Eigen::MatrixXd&, const Eigen::MatrixXd& g) {
                       t.accumulate(a, g);
                       t.accumulate(b, g);
                     });
}

Var operator-(Var a, Var b) {
  Tape& tape = *a.tape;
  require_same_shape(tape.value(a), tape.value(b), "sub");
  Eigen::MatrixXd out = tape.value(a) - tape.value(b);
  return tape.record(std::move(out), {a, b},
                     [a, b](Tape& t, const Eigen::MatrixXd&, const Eigen::MatrixXd& g) {
                       t.accumulate(a, g);
                       t.accumulate(b, -g);
                     });
}

Var operator*(double c, Var a) {
  Tape& tape = *a.tape;
  Eigen::MatrixXd out = c * tape.value(a);
  return tape.record(std::move(out), {a},
                     [a, c](Tape& t, const Eigen::MatrixXd&, const Eigen::MatrixXd& g) {
                       t.accumulate(a, c * g);
                     });
}

Var tanh(Var a) {
  Tape& tape = *a.tape;
  Eigen::MatrixXd out = tape.value(a).array().tanh();
  return tape.record(std::move(out), {a},
                     [a](Tape& t, const Eigen::MatrixXd& y, const Eigen::MatrixXd& g) {
                       t.accumulate(a, (g.array() * (1.0 - y.array().square())).matrix());
                     });
}

Var silu(Var a) {
  Tape& tape = *a.tape;
  const Eigen::MatrixXd& x = tape.value(a);
  Eigen::MatrixXd out = x.array() / (1.0 + (-x.array()).exp());
  return tape.record(std::move(out), {a},
                     [a](Tape& t, const Eigen::MatrixXd&, const Eigen::MatrixXd& g) {
                       const auto x = t.value(a).array();
                       const Eigen::ArrayXXd s = 1.0 / (1.0 + (-x).exp());
                       t.accumulate(a, (g.array() * s * (1.0 + x * (1.0 - s))).matrix());
                     });
}

Var colwise_squared_norm(Var a) {
  Tape& tape = *a.tape;
  Eigen::MatrixXd out = tape.value(a).colwise().squaredNorm();
  return tape.record(std::move(out), {a},
                     [a](Tape& t, const Eigen::MatrixXd&, const Eigen::MatrixXd& g) {
                       const Eigen::MatrixXd& x = t.value(a);
                       t.accumulate(a, 2.0 * (x.array().rowwise() * g.row(0).array()).matrix());
                     });
}

Var scale_elementwise(Var a, const Eigen::MatrixXd& c) {
  Tape& tape = *a.tape;
  require_same_shape(tape.value(a), c, "scale_elementwise");
  Eigen::MatrixXd out = tape.value(a).cwiseProduct(c);
  return tape.record(std::move(out), {a},
                     [a, c](Tape& t, const Eigen::MatrixXd&, const Eigen::MatrixXd& g) {
                       t.accumulate(a, g.cwiseProduct(c));
                     });
}

Var log_sigmoid(Var a) {
  Tape& tape = *a.tape;
  const Eigen::ArrayXXd z = tape.value(a).array();
  // log sigmoid(z) = -(max(-z, 0) + log1p(exp(-|z|)))
  Eigen::MatrixXd out =
      -((-z).max(0.0) + (-z.abs()).exp().log1p());
  return tape.record(std::move(out), {a},
                     [a](Tape& t, const Eigen::MatrixXd&, const Eigen::MatrixXd& g) {
                       const auto z = t.value(a).array();
                       // d/dz log sigmoid(z) = sigmoid(-z)
                       const Eigen::ArrayXXd s = 1.0 / (1.0 + z.exp());
                       t.accumulate(a, (g.array() * s).matrix());
                     });
}

Var sum(Var a) {
  Tape& tape = *a.tape;
  Eigen::MatrixXd out(1, 1);
  out(0, 0) = tape.value(a).sum();
  return tape.record(std::move(out), {a},
                     [a](Tape& t, const Eigen::MatrixXd&, const Eigen::MatrixXd& g) {
                       const Eigen::MatrixXd& x = t.value(a);
                       t.accumulate(a, Eigen::MatrixXd::Constant(x.rows(), x.cols(), g(0, 0)));
                     });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.tape->value(a).size());
  if (n == 0) throw ParameterError("mean: empty input");
  return (1.0 / n) * sum(a);
}

MlpTapeParams record_params(Tape& tape, const MlpParams& params, bool trainable) {
  MlpTapeParams out;
  out.arch = params.arch;
  out.trainable = trainable;
  for (int l = 0; l < params.arch.num_layers(); ++l) {
    Eigen::MatrixXd W = params.weight(l);
    Eigen::MatrixXd b = params.bias(l);
    out.weights.push_back(trainable ? tape.parameter(std::move(W)) : tape.constant(std::move(W)));
    out.biases.push_back(trainable ? tape.parameter(std::move(b)) : tape.constant(std::move(b)));
  }
  return out;
}

Var mlp_forward(Tape& tape, const MlpTapeParams& params, Var inputs) {
  if (tape.value(inputs).rows() != params.arch.in_dim())
    throw ParameterError("mlp_forward: input dimension mismatch");
  Var h = inputs;
  const int L = params.arch.num_layers();
  for (int l = 0; l < L; ++l) {
    h = add_bias(matmul(params.weights[l], h), params.biases[l]);
    if (l + 1 < L) h = params.arch.activation == Activation::kTanh ? tanh(h) : silu(h);
  }
  return h;
}

Eigen::VectorXd flat_grad(const Tape& tape, const MlpTapeParams& params) {
  const MlpArchitecture& arch = params.arch;
  Eigen::VectorXd g(arch.param_count());
  for (int l = 0; l < arch.num_layers(); ++l) {
    const Eigen::MatrixXd gw = tape.grad(params.weights[l]);
    const Eigen::MatrixXd gb = tape.grad(params.biases[l]);
    const Eigen::Index off = arch.layer_offset(l);
    Eigen::Map<RowMajorMatrix>(g.data() + off, gw.rows(), gw.cols()) = gw;
    g.segment(off + gw.size(), gb.size()) = gb.col(0);
  }
  return g;
}

Eigen::MatrixXd network_inputs(const Eigen::MatrixXd& x, const std::vector<int>& t, int T,
                               int t_embed_dim) {
  if (static_cast<Eigen::Index>(t.size()) != x.cols())
    throw ParameterError("network_inputs: one step index per column required");
  Eigen::MatrixXd in(x.rows() + t_embed_dim, x.cols());
  in.topRows(x.rows()) = x;
  for (Eigen::Index j = 0; j < x.cols(); ++j)
    in.col(j).tail(t_embed_dim) = time_embedding(t[j], T, t_embed_dim);
  return in;
}

}  // namespace msdda
