// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "msdda/gaussian.hpp"

namespace msdda {

class RewardFn;

namespace reward {

/// c * x_j
struct Axis {
  int axis = 0;
  double c = 1.0;
};
/// c . x
struct Linear {
  Eigen::VectorXd c;
};
/// -||x - target||^2
struct Radial {
  Eigen::VectorXd target;
};
/// tanh(k (c . x - b))
struct Halfspace {
  Eigen::VectorXd c;
  double b = 0.0;
  double k = 1.0;
};
/// sum_i w_i r_i
struct Weighted {
  std::vector<RewardFn> parts;
  std::vector<double> w;
};

}  // namespace reward

/// Terminal reward r(x0).
class RewardFn {
 public:
  using Kind = std::variant<reward::Axis, reward::Linear, reward::Radial, reward::Halfspace,
                            reward::Weighted>;

  RewardFn() : kind_(reward::Axis{}) {}
  RewardFn(Kind kind);

  static RewardFn axis(int j, double c = 1.0) { return RewardFn(reward::Axis{j, c}); }
  static RewardFn linear(Eigen::VectorXd c) { return RewardFn(reward::Linear{std::move(c)}); }
  static RewardFn radial(Eigen::VectorXd target) { return RewardFn(reward::Radial{std::move(target)}); }
  static RewardFn halfspace(Eigen::VectorXd c, double b, double k) {
    return RewardFn(reward::Halfspace{std::move(c), b, k});
  }

  double operator()(const Eigen::Ref<const Eigen::VectorXd>& x) const;
  /// One reward per column.
  Eigen::VectorXd evaluate(const Eigen::MatrixXd& batch) const;

  const Kind& kind() const { return kind_; }
  std::string describe() const;

 private:
  Kind kind_;
};

/// r^w = sum_i w_i r_i, evaluated in index order.
RewardFn weighted_reward(const std::vector<RewardFn>& rewards, const PreferenceWeights& w);

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;  // sample std (n - 1) / sqrt(n); 0 for n = 1
  std::size_t n = 0;
};
MeanSe mean_se(const Eigen::Ref<const Eigen::VectorXd>& values);

}  // namespace msdda
