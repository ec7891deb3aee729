// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace msdda {

enum class Activation { kTanh, kSilu };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

/// Feed-forward noise predictor layout: input is concat(x_t, time embedding),
/// output has the data dimension.
struct MlpArchitecture {
  int data_dim = 2;
  int t_embed_dim = 16;
  std::vector<int> hidden{64, 64};
  Activation activation = Activation::kSilu;

  int in_dim() const { return data_dim + t_embed_dim; }
  int out_dim() const { return data_dim; }
  int num_layers() const { return static_cast<int>(hidden.size()) + 1; }
  int fan_in(int layer) const { return layer == 0 ? in_dim() : hidden[layer - 1]; }
  int fan_out(int layer) const { return layer + 1 == num_layers() ? out_dim() : hidden[layer]; }
  Eigen::Index param_count() const;
  /// Offset of layer `layer`'s weight block in the flat vector; the bias
  /// follows the fan_out x fan_in row-major weights.
  Eigen::Index layer_offset(int layer) const;

  /// Throws ParameterError naming the bad field.
  void validate() const;

  friend bool operator==(const MlpArchitecture&, const MlpArchitecture&) = default;
};

using RowMajorMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct MlpParams {
  MlpArchitecture arch;
  Eigen::VectorXd flat;

  Eigen::Map<const RowMajorMatrix> weight(int layer) const;
  Eigen::Map<const Eigen::VectorXd> bias(int layer) const;
  Eigen::Map<RowMajorMatrix> weight(int layer);
  Eigen::Map<Eigen::VectorXd> bias(int layer);
};

MlpParams init_params(const MlpArchitecture& arch, std::uint64_t seed);
MlpParams zero_params(const MlpArchitecture& arch);

/// Interleaved (sin, cos) pairs at frequencies geometric from 2*pi to
/// 2*pi*1e4, evaluated at t / T.
Eigen::VectorXd time_embedding(int t, int T, int dim);

/// Single-sample evaluation. The result for one input never depends on what
/// else is being evaluated, which the sampler relies on for bit-exact
/// reproducibility across batch sizes and thread counts.
Eigen::VectorXd forward(const MlpParams& params, const Eigen::Ref<const Eigen::VectorXd>& x,
                        int t, int T);
/// Same, with a precomputed time embedding.
Eigen::VectorXd forward_embedded(const MlpParams& params,
                                 const Eigen::Ref<const Eigen::VectorXd>& x,
                                 const Eigen::Ref<const Eigen::VectorXd>& embedding);

/// w * a + (1 - w) * b.
MlpParams interpolate_params(const MlpParams& a, const MlpParams& b, double w);

/// Adam over a flat parameter vector.
struct Adam {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad);

 private:
  Eigen::VectorXd m_, v_;
  long t_ = 0;
};

}  // namespace msdda
