// SPDX-License-Identifier: Apache-2.0
#include "msdda/rewards.hpp"

#include <cmath>
#include <sstream>

#include "msdda/errors.hpp"

namespace msdda {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require_dim(Eigen::Index expected, Eigen::Index got, const char* what) {
  if (expected != got)
    throw ParameterError(std::string("reward.") + what + ": dimension " + std::to_string(expected) +
                         " does not match input dimension " + std::to_string(got));
}

}  // namespace

RewardFn::RewardFn(Kind kind) : kind_(std::move(kind)) {
  std::visit(overloaded{
                 [](const reward::Axis& a) {
                   if (a.axis < 0) throw ParameterError("reward.axis: must be >= 0");
                 },
                 [](const reward::Linear& l) {
                   if (l.c.size() == 0) throw ParameterError("reward.c: empty coefficient vector");
                 },
                 [](const reward::Radial& r) {
                   if (r.target.size() == 0) throw ParameterError("reward.target: empty vector");
                 },
                 [](const reward::Halfspace& h) {
                   if (h.c.size() == 0) throw ParameterError("reward.c: empty coefficient vector");
                 },
                 [](const reward::Weighted& w) {
                   if (w.parts.size() != w.w.size() || w.parts.empty())
                     throw ParameterError("weighted_reward: weights/rewards length mismatch");
                 },
             },
             kind_);
}

double RewardFn::operator()(const Eigen::Ref<const Eigen::VectorXd>& x) const {
  return std::visit(
      overloaded{
          [&](const reward::Axis& a) {
            if (a.axis >= x.size()) throw ParameterError("reward.axis: out of range for input");
            return a.c * x[a.axis];
          },
          [&](const reward::Linear& l) {
            require_dim(l.c.size(), x.size(), "c");
            return l.c.dot(x);
          },
          [&](const reward::Radial& r) {
            require_dim(r.target.size(), x.size(), "target");
            return -(x - r.target).squaredNorm();
          },
          [&](const reward::Halfspace& h) {
            require_dim(h.c.size(), x.size(), "c");
            return std::tanh(h.k * (h.c.dot(x) - h.b));
          },
          [&](const reward::Weighted& w) {
            double total = 0.0;
            for (std::size_t i = 0; i < w.parts.size(); ++i) total += w.w[i] * w.parts[i](x);
            return total;
          },
      },
      kind_);
}

Eigen::VectorXd RewardFn::evaluate(const Eigen::MatrixXd& batch) const {
  Eigen::VectorXd r(batch.cols());
  for (Eigen::Index j = 0; j < batch.cols(); ++j) r[j] = (*this)(batch.col(j));
  return r;
}

std::string RewardFn::describe() const {
  std::ostringstream os;
  std::visit(overloaded{
                 [&](const reward::Axis& a) { os << "axis(j=" << a.axis << ", c=" << a.c << ")"; },
                 [&](const reward::Linear&) { os << "linear"; },
                 [&](const reward::Radial&) { os << "radial"; },
                 [&](const reward::Halfspace& h) { os << "halfspace(b=" << h.b << ", k=" << h.k << ")"; },
                 [&](const reward::Weighted& w) { os << "weighted(M=" << w.parts.size() << ")"; },
             },
             kind_);
  return os.str();
}

RewardFn weighted_reward(const std::vector<RewardFn>& rewards, const PreferenceWeights& w) {
  if (rewards.size() != w.size())
    throw ParameterError("weighted_reward: " + std::to_string(rewards.size()) + " rewards for " +
                         std::to_string(w.size()) + " weights");
  return RewardFn(reward::Weighted{rewards, std::vector<double>(w.values().begin(), w.values().end())});
}

MeanSe mean_se(const Eigen::Ref<const Eigen::VectorXd>& values) {
  if (values.size() == 0) throw ParameterError("mean_se: empty sample");
  MeanSe out;
  out.n = static_cast<std::size_t>(values.size());
  out.mean = values.mean();
  if (out.n > 1) {
    const double ss = (values.array() - out.mean).square().sum();
    out.se = std::sqrt(ss / static_cast<double>(out.n - 1)) / std::sqrt(static_cast<double>(out.n));
  }
  return out;
}

}  // namespace msdda
