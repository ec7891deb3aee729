// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <chrono>
#include <cmath>
#include <random>

#include "msdda/errors.hpp"
#include "msdda/oracle.hpp"
#include "msdda/rng.hpp"
#include "support/oracles.hpp"

using namespace msdda;

namespace {

double max_abs(const PolicyTable& a, const PolicyTable& b) {
  double m = 0.0;
  for (std::size_t t = 0; t < a.size(); ++t) m = std::max(m, (a[t] - b[t]).cwiseAbs().maxCoeff());
  return m;
}

/// A 5-state, 2-step instance with hand-picked kernels and rewards.
DiscreteMDP handmade() {
  DiscreteMDP mdp;
  mdp.grid = uniform_grid(5, 1.0);
  mdp.T = 2;
  mdp.lambda = 0.25;
  Eigen::MatrixXd k0(5, 5), k1(5, 5);
  k0 << 0.5, 0.25, 0.125, 0.0625, 0.0625,
        0.2, 0.2, 0.2, 0.2, 0.2,
        0.1, 0.3, 0.2, 0.3, 0.1,
        0.0, 0.0, 0.5, 0.5, 0.0,
        0.05, 0.05, 0.1, 0.3, 0.5;
  k1 << 0.3, 0.3, 0.2, 0.1, 0.1,
        0.25, 0.25, 0.0, 0.25, 0.25,
        0.1, 0.2, 0.4, 0.2, 0.1,
        0.6, 0.1, 0.1, 0.1, 0.1,
        0.0, 0.0, 0.0, 0.0, 1.0;
  mdp.kernel_pre = {k0, k1};
  mdp.rewards = {(Eigen::VectorXd(5) << -1.0, -0.5, 0.0, 0.5, 1.0).finished(),
                 (Eigen::VectorXd(5) << 0.8, -0.2, 0.4, -0.9, 0.1).finished()};
  mdp.initial = Eigen::VectorXd::Constant(5, 0.2);
  return mdp;
}

/// Random row-stochastic challenger: either a fresh random policy or a
/// multiplicative perturbation of `base`.
PolicyTable challenger(const PolicyTable& base, Rng& rng, int kind) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PolicyTable out = base;
  for (auto& m : out) {
    for (Eigen::Index s = 0; s < m.rows(); ++s) {
      for (Eigen::Index a = 0; a < m.cols(); ++a) {
        if (kind == 0)
          m(s, a) = u(rng);
        else
          m(s, a) *= std::exp((kind == 1 ? 0.3 : 0.05) * (2.0 * u(rng) - 1.0));
      }
      m.row(s) /= m.row(s).sum();
    }
  }
  return out;
}

}  // namespace

TEST_CASE("random instances are valid") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const DiscreteMDP mdp = random_instance(InstanceSpec{41, 3.0, 4, 3, 0.1, seed});
    CHECK_NOTHROW(mdp.validate());
    for (const auto& k : mdp.kernel_pre) {
      CHECK(k.minCoeff() >= 0.0);
      CHECK((k.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-12);
    }
    for (const auto& r : mdp.rewards) CHECK(r.cwiseAbs().maxCoeff() <= 1.0);
  }
  DiscreteMDP bad = handmade();
  bad.kernel_pre[0](0, 0) += 0.01;
  CHECK_THROWS_AS(bad.validate(), ParameterError);
}

TEST_CASE("project_gaussian limits") {
  const Eigen::VectorXd grid = uniform_grid(41, 3.0);
  const Eigen::RowVectorXd flat = project_gaussian(grid, 0.3, 1e8);
  CHECK((flat.array() - 1.0 / 41).abs().maxCoeff() <= 1e-3);
  const Eigen::RowVectorXd spike = project_gaussian(grid, grid[17], 1e-6);
  CHECK(std::abs(spike[17] - 1.0) <= 1e-6);
  CHECK(std::abs(spike.sum() - 1.0) <= 1e-12);
  CHECK_THROWS_AS(project_gaussian(grid, 40.0, 0.01), ParameterError);
}

TEST_CASE("discretize_pretrained") {
  MlpArchitecture arch;
  arch.data_dim = 1;
  arch.t_embed_dim = 4;
  arch.hidden = {5};
  const EpsilonModel m(init_params(arch, 2), build_schedule(6, ScheduleKind::kLinear, 0.05, 0.4), 1.0);
  const DiscreteMDP mdp = discretize_pretrained(m, 41, 4.0);
  CHECK(mdp.T == 6);
  for (const auto& k : mdp.kernel_pre)
    CHECK((k.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-12);
  // The last step is deterministic.
  for (Eigen::Index s = 0; s < 41; ++s) CHECK(mdp.kernel_pre.back().row(s).maxCoeff() == 1.0);
  const EpsilonModel two(init_params(MlpArchitecture{}, 1), build_schedule(6, ScheduleKind::kLinear, 0.05, 0.4), 1.0);
  CHECK_THROWS_AS(discretize_pretrained(two, 41, 4.0), ParameterError);
}

TEST_CASE("q_backward") {
  DiscreteMDP mdp = random_instance(InstanceSpec{11, 3.0, 1, 1, 0.1, 3});
  const QTable q1 = q_backward(mdp, 0);
  for (Eigen::Index s = 0; s < 11; ++s) CHECK(q1.Q[0].row(s) == mdp.rewards[0].transpose());
  CHECK(q1.V[1].isZero(0.0));

  mdp = random_instance(InstanceSpec{11, 3.0, 4, 1, 0.1, 3});
  const QTable qc = q_backward(mdp, Eigen::VectorXd::Constant(11, 0.75));
  for (int t = 0; t < 4; ++t) {
    CHECK((qc.Q[t].array() - 0.75).abs().maxCoeff() <= 1e-15);
    CHECK(qc.advantage(t).cwiseAbs().maxCoeff() <= 1e-15);
  }

  const QTable q = q_backward(mdp, 0);
  for (int t = 0; t < 4; ++t) {
    const Eigen::MatrixXd adv = q.advantage(t);
    CHECK(mdp.kernel_pre[t].cwiseProduct(adv).rowwise().sum().cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("q_backward against Monte-Carlo rollouts") {
  DiscreteMDP mdp = random_instance(InstanceSpec{5, 2.0, 3, 1, 0.1, 8});
  Rng rng = make_stream(8, {8});
  std::uniform_real_distribution<double> u(0.05, 1.0);
  for (auto& k : mdp.kernel_pre)
    for (Eigen::Index s = 0; s < 5; ++s) {
      for (Eigen::Index a = 0; a < 5; ++a) k(s, a) = u(rng);
      k.row(s) /= k.row(s).sum();
    }
  const QTable q = q_backward(mdp, 0);
  for (int t = 0; t < 2; ++t) {
    for (int a = 0; a < 5; ++a) {
      const auto [mean, se] =
          oracles::monte_carlo_q(mdp.kernel_pre, mdp.rewards[0], t, a, 1'000'000, 100 * t + a);
      CHECK(std::abs(mean - q.Q[t](0, a)) <= 4.0 * se);
    }
  }
}

TEST_CASE("optimal_policy") {
  const DiscreteMDP mdp = handmade();
  for (std::size_t i = 0; i < 2; ++i) {
    const QTable q = q_backward(mdp, i);
    const PolicyTable pi = optimal_policy(mdp, q);
    for (int t = 0; t < 2; ++t) {
      CHECK((pi[t] - oracles::tilted_rows(mdp.kernel_pre[t], q.Q[t], mdp.lambda)).cwiseAbs().maxCoeff() <= 1e-14);
      CHECK((pi[t].rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-12);
    }
  }

  DiscreteMDP flat = random_instance(InstanceSpec{21, 3.0, 3, 1, 1e9, 4});
  const QTable qf = q_backward(flat, 0);
  CHECK(max_abs(optimal_policy(flat, qf), flat.kernel_pre) <= 1e-6);

  // Constant Q rows leave pi_pre untouched.
  const DiscreteMDP mdp2 = random_instance(InstanceSpec{21, 3.0, 3, 1, 0.1, 4});
  QTable qc = q_backward(mdp2, 0);
  for (auto& m : qc.Q)
    for (Eigen::Index s = 0; s < m.rows(); ++s) m.row(s).setConstant(0.1 * s - 0.7);
  CHECK(optimal_policy(mdp2, qc) == mdp2.kernel_pre);
}

TEST_CASE("optimal_policy is invariant to shifting a Q row") {
  const DiscreteMDP mdp = random_instance(InstanceSpec{21, 3.0, 3, 1, 0.125, 6});
  QTable q = q_backward(mdp, 0);
  // Dyadic values keep the shifted arithmetic exact.
  for (auto& m : q.Q) m = (m * 64.0).array().round().matrix() / 64.0;
  const PolicyTable base = optimal_policy(mdp, q);
  QTable shifted = q;
  for (auto& m : shifted.Q)
    for (Eigen::Index s = 0; s < m.rows(); ++s) m.row(s).array() += 4.0 * ((s % 3) - 1);
  CHECK(optimal_policy(mdp, shifted) == base);
}

TEST_CASE("fuse_policies") {
  const DiscreteMDP mdp = random_instance(InstanceSpec{21, 3.0, 3, 3, 0.1, 9});
  std::vector<PolicyTable> pis;
  for (std::size_t i = 0; i < 3; ++i) pis.push_back(optimal_policy(mdp, q_backward(mdp, i)));
  CHECK(fuse_policies({pis[0]}, PreferenceWeights{1.0}) == pis[0]);
  CHECK(fuse_policies({pis[1], pis[1]}, PreferenceWeights{0.3, 0.7}) == pis[1]);
  CHECK(fuse_policies(pis, PreferenceWeights::unit(3, 2)) == pis[2]);

  const PreferenceWeights w{0.2, 0.5, 0.3};
  const PolicyTable f = fuse_policies(pis, w);
  CHECK(fuse_policies({pis[2], pis[0], pis[1]}, PreferenceWeights{0.3, 0.2, 0.5}) == f);
  for (const auto& m : f) CHECK((m.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-12);

  PolicyTable holed = pis[0];
  holed[0](0, 3) = 0.0;
  holed[0].row(0) /= holed[0].row(0).sum();
  CHECK(fuse_policies({holed, pis[1]}, PreferenceWeights{0.5, 0.5})[0](0, 3) == 0.0);
  CHECK(fuse_policies({holed, pis[1]}, PreferenceWeights{0.0, 1.0})[0](0, 3) > 0.0);
  CHECK_THROWS_AS(fuse_policies(pis, PreferenceWeights{0.5, 0.5}), ParameterError);
}

TEST_CASE("fused and direct optimal policies agree on random instances") {
  const auto start = std::chrono::steady_clock::now();
  Rng rng = make_stream(2024, {1});
  std::uniform_int_distribution<int> S_d(5, 101), T_d(1, 6), M_d(2, 3);
  std::uniform_real_distribution<double> lam_d(0.05, 1.0);
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const InstanceSpec spec{S_d(rng), 3.0, T_d(rng), M_d(rng), lam_d(rng), seed};
    const DiscreteMDP mdp = random_instance(spec);
    const PreferenceWeights w = random_simplex_weights(spec.M, seed);
    const Theorem1Report rep = verify_theorem1(mdp, w, seed);
    CHECK(rep.max_tv <= 1e-10);
    CHECK(q_additivity_check(mdp, w) <= 1e-12);
    CHECK(q_additivity_check(mdp, PreferenceWeights::unit(spec.M, 0)) == 0.0);
    CHECK(reward_decomposition_check(mdp, mdp.rewards[0], 200, seed) <= 1e-10);

    // Degenerate weights give back the single-objective policy.
    const PolicyTable pi0 = optimal_policy(mdp, q_backward(mdp, 0));
    std::vector<PolicyTable> pis{pi0};
    for (int i = 1; i < spec.M; ++i) pis.push_back(optimal_policy(mdp, q_backward(mdp, i)));
    CHECK(max_abs(fuse_policies(pis, PreferenceWeights::unit(spec.M, 0)), pi0) <= 1e-14);
  }
  const Theorem1Report flagship =
      verify_theorem1(random_instance(InstanceSpec{}), random_simplex_weights(2, 0), 0);
  CHECK(flagship.max_tv <= 1e-10);
  CHECK(flagship.S == 41);
  CHECK(flagship.T == 4);
  CHECK(std::chrono::steady_clock::now() - start < std::chrono::seconds(10));
}

TEST_CASE("reward decomposition special cases") {
  const DiscreteMDP one = random_instance(InstanceSpec{15, 3.0, 1, 1, 0.1, 1});
  CHECK(reward_decomposition_check(one, one.rewards[0], 1000, 1) <= 1e-15);
  const DiscreteMDP mdp = random_instance(InstanceSpec{15, 3.0, 4, 1, 0.1, 1});
  CHECK(reward_decomposition_check(mdp, Eigen::VectorXd::Constant(15, 0.5), 1000, 1) <= 1e-15);
}

TEST_CASE("objective values") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const DiscreteMDP mdp = random_instance(InstanceSpec{21, 3.0, 3, 1, 0.1, seed});
    const Eigen::VectorXd& r = mdp.rewards[0];
    const PolicyTable star = optimal_policy(mdp, q_backward(mdp, r));
    const ObjectiveValues pre = objective_values(mdp, mdp.kernel_pre, r);
    const ObjectiveValues opt = objective_values(mdp, star, r);
    CHECK(pre.stepkl_objective == doctest::Approx(pre.expected_reward).epsilon(1e-12));
    CHECK(pre.rollout_objective == pre.expected_reward);
    CHECK(opt.stepkl_objective > pre.stepkl_objective);
    CHECK(opt.expected_reward >= pre.expected_reward);
    Rng rng = make_stream(seed, {31});
    for (int c = 0; c < 20; ++c) {
      const PolicyTable other = challenger(star, rng, c % 3);
      CHECK(opt.stepkl_objective > objective_values(mdp, other, r).stepkl_objective);
    }
  }
}

TEST_CASE("discrete kl") {
  const Eigen::RowVectorXd p = (Eigen::RowVectorXd(3) << 0.5, 0.5, 0.0).finished();
  const Eigen::RowVectorXd q = (Eigen::RowVectorXd(3) << 0.25, 0.25, 0.5).finished();
  CHECK(discrete_kl(p, p) == 0.0);
  CHECK(discrete_kl(p, q) == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(std::isinf(discrete_kl(q, p)));
  CHECK(total_variation(p, q) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("tilted Gaussian posterior") {
  const NoiseSchedule s(ScheduleSpec{});
  TiltedGaussianCase c{0.3, 0.8, 0.0, 0.2, 40, 0.5};
  CHECK(analytic_tilted_posterior(s, c) == exact_reverse_posterior(s, c.m, c.s2, c.t, c.x_t));

  c.c = 1.5;
  const GaussianPosterior base = exact_reverse_posterior(s, c.m, c.s2, c.t, c.x_t);
  double prev = std::abs(analytic_tilted_posterior(s, c).mean[0] - base.mean[0]);
  for (double lam : {1.0, 10.0, 1e3, 1e6}) {
    c.lambda = lam;
    const double shift = std::abs(analytic_tilted_posterior(s, c).mean[0] - base.mean[0]);
    CHECK(shift < prev);
    prev = shift;
  }
  CHECK(prev < 1e-6);

  // The exact reverse conditional against Bayes' rule on a grid.
  for (int t : {2, 30, 100}) {
    const GaussianPosterior e = exact_reverse_posterior(s, 0.4, 1.3, t, -0.7);
    const double ab_prev = s.alpha_bar(t - 1);
    const double prior_mean = std::sqrt(ab_prev) * 0.4, prior_var = ab_prev * 1.3 + 1 - ab_prev;
    const double a = std::sqrt(s.alpha(t)), lik_var = s.beta(t);
    // x_t | x_{t-1} ~ N(a x_{t-1}, beta_t): Gaussian product in x_{t-1}.
    const double post_var = 1.0 / (1.0 / prior_var + a * a / lik_var);
    const double post_mean = post_var * (prior_mean / prior_var + a * -0.7 / lik_var);
    CHECK(e.variance == doctest::Approx(post_var).epsilon(1e-12));
    CHECK(e.mean[0] == doctest::Approx(post_mean).epsilon(1e-12));
  }

  for (std::uint64_t i = 0; i < 10; ++i) {
    const TiltedGaussianCase r = random_tilted_case(s, 3, i);
    const GaussianPosterior a = analytic_tilted_posterior(s, r);
    const GaussianPosterior q = quadrature_tilted_posterior(s, r);
    const double scale = std::max(std::abs(q.mean[0]), std::sqrt(q.variance));
    CHECK(std::abs(a.mean[0] - q.mean[0]) <= 1e-5 * scale);
    CHECK(std::abs(a.variance - q.variance) <= 1e-5 * q.variance);
  }

  CHECK_THROWS_AS(analytic_tilted_posterior(s, 0.0, 1.0, RewardFn::radial(Eigen::VectorXd::Zero(1)),
                                            0.1, 5, 0.0),
                  ParameterError);
  const GaussianPosterior via_fn =
      analytic_tilted_posterior(s, 0.3, 0.8, RewardFn::axis(0, 1.5), 0.2, 40, 0.5);
  c = {0.3, 0.8, 1.5, 0.2, 40, 0.5};
  CHECK(via_fn == analytic_tilted_posterior(s, c));
}
