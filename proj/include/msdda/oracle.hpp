// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "msdda/diffusion.hpp"
#include "msdda/gaussian.hpp"
#include "msdda/rewards.hpp"
#include "msdda/schedule.hpp"

namespace msdda {

/// Finite-horizon KL-regularized MDP on a uniform 1-D grid with deterministic
/// dynamics s_{t+1} = a_t. kernel_pre[t](s, a) = pi_pre(a | s) at step t;
/// rewards are terminal reward vectors over grid states.
struct DiscreteMDP {
  Eigen::VectorXd grid;
  int T = 0;
  std::vector<Eigen::MatrixXd> kernel_pre;
  std::vector<Eigen::VectorXd> rewards;
  double lambda = 0.1;
  /// Distribution of s_0 over the grid.
  Eigen::VectorXd initial;

  int S() const { return static_cast<int>(grid.size()); }
  /// Throws ParameterError naming the first violated invariant.
  void validate() const;
};

/// T row-stochastic S x S matrices.
using PolicyTable = std::vector<Eigen::MatrixXd>;

/// Q[t](s, a) for t < T and V[t](s) for t <= T, with V[T] = 0.
struct QTable {
  std::vector<Eigen::MatrixXd> Q;
  std::vector<Eigen::VectorXd> V;
  /// A[t] = Q[t] - V[t] broadcast along rows.
  Eigen::MatrixXd advantage(int t) const;
};

/// Uniform grid of S points on [-L, L].
Eigen::VectorXd uniform_grid(int S, double L);

/// Normalized Gaussian density N(mean, variance) evaluated on the grid.
/// Throws ParameterError if the pre-normalization mass sum(density) * dx is
/// below 1e-6.
Eigen::RowVectorXd project_gaussian(const Eigen::VectorXd& grid, double mean, double variance);

/// Projects the reverse chain of a 1-D model onto the grid. MDP step t maps
/// diffusion step T - t to T - t - 1. The last step is deterministic: the
/// reverse mean is snapped to the nearest grid point. s_0 ~ N(0, 1) projected.
DiscreteMDP discretize_pretrained(const EpsilonModel& model, int S, double L, double lambda = 0.1);

struct InstanceSpec {
  int S = 41;
  double L = 3.0;
  int T = 4;
  int M = 2;
  double lambda = 0.1;
  std::uint64_t seed = 0;
};

/// Random instance: Gaussian-projected kernels with random drift and width
/// per step, and M smooth rewards bounded in [-1, 1].
DiscreteMDP random_instance(const InstanceSpec& spec);

/// Uniform draw from the probability simplex of dimension M.
PreferenceWeights random_simplex_weights(int M, std::uint64_t seed);

QTable q_backward(const DiscreteMDP& mdp, const Eigen::VectorXd& reward);
inline QTable q_backward(const DiscreteMDP& mdp, std::size_t reward_index) {
  return q_backward(mdp, mdp.rewards.at(reward_index));
}

/// pi*(a|s) = pi_pre(a|s) exp(Q(s,a)/lambda) / Z(s), max-subtracted. Rows
/// whose Q is constant on the support are returned unchanged.
PolicyTable optimal_policy(const DiscreteMDP& mdp, const QTable& q);

/// Row-normalized prod_i pi_i^{w_i}, computed in log space. An entry where
/// any contributing pi_i is 0 maps to 0.
PolicyTable fuse_policies(const std::vector<PolicyTable>& policies, const PreferenceWeights& w);

Eigen::VectorXd weighted_reward_vector(const DiscreteMDP& mdp, const PreferenceWeights& w);

double total_variation(const Eigen::Ref<const Eigen::RowVectorXd>& p,
                       const Eigen::Ref<const Eigen::RowVectorXd>& q);

struct Theorem1Report {
  double max_tv = 0.0;
  int argmax_t = 0;
  int argmax_s = 0;
  int S = 0;
  int T = 0;
  int M = 0;
  double lambda = 0.0;
  std::uint64_t seed = 0;
};

/// Max over (t, s) of TV(fused optimal policies, optimal policy for r^w).
Theorem1Report verify_theorem1(const DiscreteMDP& mdp, const PreferenceWeights& w,
                               std::uint64_t seed = 0);

/// max |Q^w - sum_i w_i Q^i| over all entries.
double q_additivity_check(const DiscreteMDP& mdp, const PreferenceWeights& w);

/// Rolls out trajectories under pi_pre and returns the largest
/// |r(s_T) - V(s_0) - sum_t A(s_t, a_t)|.
double reward_decomposition_check(const DiscreteMDP& mdp, const Eigen::VectorXd& reward,
                                  int n_trajectories, std::uint64_t seed);

/// State distributions d_0..d_T under a policy, starting from mdp.initial.
std::vector<Eigen::VectorXd> state_distributions(const DiscreteMDP& mdp, const PolicyTable& policy);

/// KL(p || q) for discrete rows; +inf if p puts mass where q has none.
double discrete_kl(const Eigen::Ref<const Eigen::RowVectorXd>& p,
                   const Eigen::Ref<const Eigen::RowVectorXd>& q);

struct ObjectiveValues {
  /// E_pi[r(s_T)].
  double expected_reward = 0.0;
  /// E[V_pre(s_0)] + sum_t E_{s ~ d_t^pre}[sum_a pi(a|s) A_pre(s,a) - lambda KL(pi || pi_pre)].
  double stepkl_objective = 0.0;
  /// E_pi[r(s_T)] - lambda sum_t E_{s ~ d_t^pi}[KL(pi || pi_pre)].
  double rollout_objective = 0.0;
};
ObjectiveValues objective_values(const DiscreteMDP& mdp, const PolicyTable& policy,
                                 const Eigen::VectorXd& reward);

/// Data N(m, s2), exact reverse chain as the reference policy, reward c * x0.
struct TiltedGaussianCase {
  double m = 0.0;
  double s2 = 1.0;
  double c = 1.0;
  double lambda = 0.1;
  int t = 1;
  double x_t = 0.0;
};

/// Random case: m in [-1, 1], s2 in [0.1, 2], c in [-2, 2], lambda in
/// [0.05, 1], t uniform on 1..T, x_t in [-2, 2].
TiltedGaussianCase random_tilted_case(const NoiseSchedule& schedule, std::uint64_t seed,
                                      std::uint64_t index);

/// Exact reverse conditional q(x_{t-1} | x_t) for N(m, s2) data.
GaussianPosterior exact_reverse_posterior(const NoiseSchedule& schedule, double m, double s2, int t,
                                          double x_t);
/// Reverse conditional tilted by exp(E[c x0 | x_{t-1}] / lambda): same
/// variance, mean shifted by variance * c * g / lambda where
/// g = sqrt(abar_{t-1}) s2 / (abar_{t-1} s2 + 1 - abar_{t-1}).
GaussianPosterior analytic_tilted_posterior(const NoiseSchedule& schedule,
                                            const TiltedGaussianCase& c);
/// Same with the reward given as a RewardFn; only axis-0 and 1-D linear
/// rewards are accepted.
GaussianPosterior analytic_tilted_posterior(const NoiseSchedule& schedule, double m, double s2,
                                            const RewardFn& reward, double lambda, int t,
                                            double x_t);
/// Brute-force counterpart: nested quadrature of pi_pre exp(Q / lambda) with
/// Q(z) = E[c x0 | x_{t-1} = z] integrated over x0 by Bayes' rule.
GaussianPosterior quadrature_tilted_posterior(const NoiseSchedule& schedule,
                                              const TiltedGaussianCase& c, int nodes = 801);

}  // namespace msdda
