// SPDX-License-Identifier: Apache-2.0
#include "msdda/nn.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "msdda/errors.hpp"
#include "msdda/rng.hpp"

namespace msdda {

std::string_view to_string(Activation a) { return a == Activation::kTanh ? "tanh" : "silu"; }

Activation parse_activation(std::string_view name) {
  if (name == "tanh") return Activation::kTanh;
  if (name == "silu") return Activation::kSilu;
  throw ParameterError("arch.activation: unknown activation '" + std::string(name) + "'");
}

Eigen::Index MlpArchitecture::param_count() const { return layer_offset(num_layers()); }

Eigen::Index MlpArchitecture::layer_offset(int layer) const {
  Eigen::Index off = 0;
  for (int l = 0; l < layer; ++l)
    off += static_cast<Eigen::Index>(fan_in(l)) * fan_out(l) + fan_out(l);
  return off;
}

void MlpArchitecture::validate() const {
  if (data_dim < 1) throw ParameterError("arch.data_dim: must be >= 1");
  if (t_embed_dim < 2 || t_embed_dim % 2 != 0)
    throw ParameterError("arch.t_embed_dim: must be an even integer >= 2");
  for (int h : hidden)
    if (h < 1) throw ParameterError("arch.hidden: layer widths must be >= 1");
}

Eigen::Map<const RowMajorMatrix> MlpParams::weight(int layer) const {
  return {flat.data() + arch.layer_offset(layer), arch.fan_out(layer), arch.fan_in(layer)};
}

Eigen::Map<const Eigen::VectorXd> MlpParams::bias(int layer) const {
  const Eigen::Index off =
      arch.layer_offset(layer) + static_cast<Eigen::Index>(arch.fan_in(layer)) * arch.fan_out(layer);
  return {flat.data() + off, arch.fan_out(layer)};
}

Eigen::Map<RowMajorMatrix> MlpParams::weight(int layer) {
  return {flat.data() + arch.layer_offset(layer), arch.fan_out(layer), arch.fan_in(layer)};
}

Eigen::Map<Eigen::VectorXd> MlpParams::bias(int layer) {
  const Eigen::Index off =
      arch.layer_offset(layer) + static_cast<Eigen::Index>(arch.fan_in(layer)) * arch.fan_out(layer);
  return {flat.data() + off, arch.fan_out(layer)};
}

MlpParams init_params(const MlpArchitecture& arch, std::uint64_t seed) {
  MlpParams p = zero_params(arch);
  Rng rng = make_stream(seed, StreamTag::kPretrain, 0xA11CE);
  for (int l = 0; l < arch.num_layers(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(arch.fan_in(l)));
    std::uniform_real_distribution<double> u(-bound, bound);
    auto W = p.weight(l);
    for (Eigen::Index r = 0; r < W.rows(); ++r)
      for (Eigen::Index c = 0; c < W.cols(); ++c) W(r, c) = u(rng);
  }
  return p;
}

MlpParams zero_params(const MlpArchitecture& arch) {
  arch.validate();
  return MlpParams{arch, Eigen::VectorXd::Zero(arch.param_count())};
}

Eigen::VectorXd time_embedding(int t, int T, int dim) {
  if (T < 1 || t < 1 || t > T)
    throw ParameterError("time_embedding: step t=" + std::to_string(t) + " outside [1, " +
                         std::to_string(T) + "]");
  if (dim < 2 || dim % 2 != 0) throw ParameterError("time_embedding: dim must be even and >= 2");
  const int pairs = dim / 2;
  const double phase = static_cast<double>(t) / T;
  Eigen::VectorXd e(dim);
  for (int k = 0; k < pairs; ++k) {
    const double expo = pairs == 1 ? 0.0 : 4.0 * k / (dim - 2);
    const double omega = 2.0 * std::numbers::pi * std::pow(10.0, expo);
    e[2 * k] = std::sin(omega * phase);
    e[2 * k + 1] = std::cos(omega * phase);
  }
  return e;
}

namespace {

void activate(Activation a, Eigen::VectorXd& h) {
  if (a == Activation::kTanh) {
    h = h.array().tanh();
  } else {
    h = h.array() / (1.0 + (-h.array()).exp());
  }
}

}  // namespace

Eigen::VectorXd forward_embedded(const MlpParams& params,
                                 const Eigen::Ref<const Eigen::VectorXd>& x,
                                 const Eigen::Ref<const Eigen::VectorXd>& embedding) {
  const MlpArchitecture& arch = params.arch;
  if (x.size() != arch.data_dim || embedding.size() != arch.t_embed_dim)
    throw ParameterError("forward: input dimension mismatch");
  Eigen::VectorXd h(arch.in_dim());
  h << x, embedding;
  for (int l = 0; l < arch.num_layers(); ++l) {
    Eigen::VectorXd next = params.bias(l);
    next.noalias() += params.weight(l) * h;
    if (l + 1 < arch.num_layers()) activate(arch.activation, next);
    h = std::move(next);
  }
  return h;
}

Eigen::VectorXd forward(const MlpParams& params, const Eigen::Ref<const Eigen::VectorXd>& x,
                        int t, int T) {
  return forward_embedded(params, x, time_embedding(t, T, params.arch.t_embed_dim));
}

MlpParams interpolate_params(const MlpParams& a, const MlpParams& b, double w) {
  if (!(a.arch == b.arch) || a.flat.size() != b.flat.size())
    throw ParameterError("interpolate_params: architecture mismatch");
  if (!(w >= 0.0 && w <= 1.0)) throw ParameterError("interpolate_params: w must lie in [0, 1]");
  if (w == 1.0) return a;
  if (w == 0.0) return b;
  return MlpParams{a.arch, w * a.flat + (1.0 - w) * b.flat};
}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad) {
  if (m_.size() != params.size()) {
    m_ = Eigen::VectorXd::Zero(params.size());
    v_ = Eigen::VectorXd::Zero(params.size());
    t_ = 0;
  }
  ++t_;
  m_ = beta1 * m_ + (1.0 - beta1) * grad;
  v_ = beta2 * v_ + (1.0 - beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
  params.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps);
}

}  // namespace msdda
