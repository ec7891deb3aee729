// SPDX-License-Identifier: Apache-2.0
#include "msdda/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

#include "msdda/errors.hpp"
#include "msdda/rng.hpp"

namespace msdda {

namespace {

std::string at(int t, int s) { return " at (t=" + std::to_string(t) + ", s=" + std::to_string(s) + ")"; }

void check_policy_shape(const DiscreteMDP& mdp, const PolicyTable& p, const char* what) {
  if (static_cast<int>(p.size()) != mdp.T)
    throw ParameterError(std::string(what) + ": expected " + std::to_string(mdp.T) + " steps");
  for (const auto& k : p)
    if (k.rows() != mdp.S() || k.cols() != mdp.S())
      throw ParameterError(std::string(what) + ": expected S x S matrices");
}

void check_reward(const DiscreteMDP& mdp, const Eigen::VectorXd& r) {
  if (r.size() != mdp.S())
    throw ParameterError("reward: length " + std::to_string(r.size()) + " does not match S = " +
                         std::to_string(mdp.S()));
}

double grid_spacing(const Eigen::VectorXd& grid) {
  return grid.size() > 1 ? grid[1] - grid[0] : 1.0;
}

}  // namespace

void DiscreteMDP::validate() const {
  const int n = S();
  if (n < 1) throw ParameterError("mdp.grid: empty");
  for (int i = 1; i < n; ++i)
    if (!(grid[i] > grid[i - 1])) throw ParameterError("mdp.grid: not strictly increasing");
  if (T < 1) throw ParameterError("mdp.T: must be >= 1");
  if (static_cast<int>(kernel_pre.size()) != T)
    throw ParameterError("mdp.kernel_pre: expected " + std::to_string(T) + " kernels");
  if (!(lambda > 0.0)) throw ParameterError("mdp.lambda: must be > 0");
  for (int t = 0; t < T; ++t) {
    const auto& k = kernel_pre[t];
    if (k.rows() != n || k.cols() != n) throw ParameterError("mdp.kernel_pre: expected S x S");
    for (int s = 0; s < n; ++s) {
      if ((k.row(s).array() < 0.0).any() || !k.row(s).allFinite())
        throw ParameterError("mdp.kernel_pre: negative or non-finite entry" + at(t, s));
      if (std::abs(k.row(s).sum() - 1.0) > 1e-12)
        throw ParameterError("mdp.kernel_pre: row does not sum to 1" + at(t, s));
    }
  }
  for (const auto& r : rewards) check_reward(*this, r);
  if (initial.size() != n || std::abs(initial.sum() - 1.0) > 1e-12 || (initial.array() < 0.0).any())
    throw ParameterError("mdp.initial: not a distribution over the grid");
}

Eigen::MatrixXd QTable::advantage(int t) const {
  return Q[t].colwise() - V[t];
}

Eigen::VectorXd uniform_grid(int S, double L) {
  if (S < 2) throw ParameterError("grid.S: must be >= 2");
  if (!(L > 0.0)) throw ParameterError("grid.L: must be > 0");
  return Eigen::VectorXd::LinSpaced(S, -L, L);
}

Eigen::RowVectorXd project_gaussian(const Eigen::VectorXd& grid, double mean, double variance) {
  if (!(variance > 0.0) || !std::isfinite(mean))
    throw ParameterError("project_gaussian: need finite mean and positive variance");
  const double norm = 1.0 / std::sqrt(2.0 * std::numbers::pi * variance);
  Eigen::RowVectorXd row(grid.size());
  for (Eigen::Index a = 0; a < grid.size(); ++a) {
    const double d = grid[a] - mean;
    row[a] = norm * std::exp(-0.5 * d * d / variance);
  }
  const double total = row.sum();
  if (!(total * grid_spacing(grid) >= 1e-6))
    throw ParameterError("project_gaussian: grid too coarse for N(" + std::to_string(mean) + ", " +
                         std::to_string(variance) + "); increase L or S");
  return row / total;
}

DiscreteMDP discretize_pretrained(const EpsilonModel& model, int S, double L, double lambda) {
  if (model.data_dim() != 1) throw ParameterError("discretize_pretrained: model must be 1-D");
  DiscreteMDP mdp;
  mdp.grid = uniform_grid(S, L);
  mdp.T = model.schedule().T();
  mdp.lambda = lambda;
  mdp.initial = project_gaussian(mdp.grid, 0.0, 1.0).transpose();
  const double dx = grid_spacing(mdp.grid);
  Eigen::VectorXd x(1);
  for (int t = 0; t < mdp.T; ++t) {
    const int tau = mdp.T - t;
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(S, S);
    for (int s = 0; s < S; ++s) {
      x[0] = mdp.grid[s];
      const GaussianPosterior p = reverse_posterior(model, x, tau);
      if (tau == 1) {
        const double u = std::clamp((p.mean[0] + L) / dx, 0.0, static_cast<double>(S - 1));
        k(s, static_cast<Eigen::Index>(std::floor(u + 0.5))) = 1.0;
      } else {
        k.row(s) = project_gaussian(mdp.grid, p.mean[0], p.variance);
      }
    }
    mdp.kernel_pre.push_back(std::move(k));
  }
  return mdp;
}

DiscreteMDP random_instance(const InstanceSpec& spec) {
  if (spec.M < 1) throw ParameterError("instance.M: must be >= 1");
  DiscreteMDP mdp;
  mdp.grid = uniform_grid(spec.S, spec.L);
  mdp.T = spec.T;
  mdp.lambda = spec.lambda;
  mdp.initial = project_gaussian(mdp.grid, 0.0, 1.0).transpose();
  Rng rng = make_stream(spec.seed, StreamTag::kOracle, 0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * u01(rng); };
  for (int t = 0; t < spec.T; ++t) {
    const double drift = uniform(0.6, 1.1);
    const double shift = uniform(-0.3, 0.3) * spec.L / 3.0;
    const double width = uniform(0.2, 0.7) * spec.L / 3.0;
    Eigen::MatrixXd k(spec.S, spec.S);
    for (int s = 0; s < spec.S; ++s)
      k.row(s) = project_gaussian(mdp.grid, drift * mdp.grid[s] + shift, width * width);
    mdp.kernel_pre.push_back(std::move(k));
  }
  for (int i = 0; i < spec.M; ++i) {
    double amp[3], freq[3], phase[3], total = 0.0;
    for (int j = 0; j < 3; ++j) {
      amp[j] = uniform(-1.0, 1.0);
      freq[j] = uniform(0.3, 2.0);
      phase[j] = uniform(0.0, 2.0 * std::numbers::pi);
      total += std::abs(amp[j]);
    }
    Eigen::VectorXd r(spec.S);
    for (int s = 0; s < spec.S; ++s) {
      double v = 0.0;
      for (int j = 0; j < 3; ++j) v += amp[j] * std::sin(freq[j] * mdp.grid[s] + phase[j]);
      r[s] = v / total;
    }
    mdp.rewards.push_back(std::move(r));
  }
  return mdp;
}

PreferenceWeights random_simplex_weights(int M, std::uint64_t seed) {
  if (M < 1) throw ParameterError("random_simplex_weights: M must be >= 1");
  Rng rng = make_stream(seed, StreamTag::kOracle, 2);
  std::exponential_distribution<double> e(1.0);
  std::vector<double> w(M);
  double total = 0.0;
  for (auto& v : w) total += (v = e(rng));
  for (auto& v : w) v /= total;
  return PreferenceWeights(std::move(w));
}

QTable q_backward(const DiscreteMDP& mdp, const Eigen::VectorXd& reward) {
  check_reward(mdp, reward);
  const int S = mdp.S();
  QTable q;
  q.Q.resize(mdp.T);
  q.V.resize(mdp.T + 1);
  q.V[mdp.T] = Eigen::VectorXd::Zero(S);
  for (int t = mdp.T - 1; t >= 0; --t) {
    const Eigen::VectorXd& next = t == mdp.T - 1 ? reward : q.V[t + 1];
    q.Q[t] = next.transpose().replicate(S, 1);
    q.V[t] = mdp.kernel_pre[t].cwiseProduct(q.Q[t]).rowwise().sum();
  }
  return q;
}

PolicyTable optimal_policy(const DiscreteMDP& mdp, const QTable& q) {
  check_policy_shape(mdp, q.Q, "optimal_policy: Q");
  const int S = mdp.S();
  PolicyTable out(mdp.T);
  for (int t = 0; t < mdp.T; ++t) {
    const auto& pre = mdp.kernel_pre[t];
    out[t] = pre;
    for (int s = 0; s < S; ++s) {
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      for (int a = 0; a < S; ++a) {
        if (pre(s, a) > 0.0) {
          lo = std::min(lo, q.Q[t](s, a));
          hi = std::max(hi, q.Q[t](s, a));
        }
      }
      if (lo == hi) continue;
      Eigen::RowVectorXd e = Eigen::RowVectorXd::Zero(S);
      for (int a = 0; a < S; ++a)
        if (pre(s, a) > 0.0) e[a] = pre(s, a) * std::exp((q.Q[t](s, a) - hi) / mdp.lambda);
      const double z = e.sum();
      if (!(z > 0.0) || !std::isfinite(z))
        throw NumericError("optimal_policy: normalizer underflow or overflow" + at(t, s));
      out[t].row(s) = e / z;
    }
  }
  return out;
}

PolicyTable fuse_policies(const std::vector<PolicyTable>& policies, const PreferenceWeights& w) {
  if (policies.empty()) throw ParameterError("fuse_policies: no policies");
  if (w.size() != policies.size())
    throw ParameterError("fuse_policies: " + std::to_string(w.size()) + " weights for " +
                         std::to_string(policies.size()) + " policies");
  const auto& first = policies.front();
  for (const auto& p : policies) {
    if (p.size() != first.size()) throw ParameterError("fuse_policies: horizon mismatch");
    for (std::size_t t = 0; t < p.size(); ++t)
      if (p[t].rows() != first[t].rows() || p[t].cols() != first[t].cols())
        throw ParameterError("fuse_policies: shape mismatch");
  }
  std::vector<std::size_t> active;
  for (std::size_t i = 0; i < policies.size(); ++i)
    if (w[i] > 0.0) active.push_back(i);
  if (active.empty()) throw ParameterError("fuse_policies: all weights are zero");
  if (std::all_of(active.begin(), active.end(),
                  [&](std::size_t i) { return policies[i] == policies[active.front()]; }))
    return policies[active.front()];

  const double neg_inf = -std::numeric_limits<double>::infinity();
  PolicyTable out(first.size());
  std::vector<double> terms(active.size());
  for (std::size_t t = 0; t < first.size(); ++t) {
    const Eigen::Index S = first[t].rows(), A = first[t].cols();
    out[t].resize(S, A);
    for (Eigen::Index s = 0; s < S; ++s) {
      Eigen::RowVectorXd log_row(A);
      double hi = neg_inf;
      for (Eigen::Index a = 0; a < A; ++a) {
        bool zero = false;
        for (std::size_t k = 0; k < active.size(); ++k) {
          const double p = policies[active[k]][t](s, a);
          if (p <= 0.0) {
            zero = true;
            break;
          }
          terms[k] = w[active[k]] * std::log(p);
        }
        if (zero) {
          log_row[a] = neg_inf;
          continue;
        }
        // Sorted summation makes the result independent of input order.
        std::sort(terms.begin(), terms.end());
        double acc = 0.0;
        for (double v : terms) acc += v;
        log_row[a] = acc;
        hi = std::max(hi, acc);
      }
      if (hi == neg_inf)
        throw NumericError("fuse_policies: row has zero mass" + at(static_cast<int>(t), static_cast<int>(s)));
      Eigen::RowVectorXd e(A);
      for (Eigen::Index a = 0; a < A; ++a)
        e[a] = log_row[a] == neg_inf ? 0.0 : std::exp(log_row[a] - hi);
      out[t].row(s) = e / e.sum();
    }
  }
  return out;
}

Eigen::VectorXd weighted_reward_vector(const DiscreteMDP& mdp, const PreferenceWeights& w) {
  if (w.size() != mdp.rewards.size())
    throw ParameterError("weighted reward: " + std::to_string(w.size()) + " weights for " +
                         std::to_string(mdp.rewards.size()) + " rewards");
  Eigen::VectorXd r = Eigen::VectorXd::Zero(mdp.S());
  for (std::size_t i = 0; i < w.size(); ++i) r += w[i] * mdp.rewards[i];
  return r;
}

double total_variation(const Eigen::Ref<const Eigen::RowVectorXd>& p,
                       const Eigen::Ref<const Eigen::RowVectorXd>& q) {
  if (p.size() != q.size()) throw ParameterError("total_variation: size mismatch");
  return 0.5 * (p - q).cwiseAbs().sum();
}

Theorem1Report verify_theorem1(const DiscreteMDP& mdp, const PreferenceWeights& w,
                               std::uint64_t seed) {
  mdp.validate();
  if (mdp.rewards.size() < 2) throw ParameterError("verify_theorem1: need at least 2 rewards");
  std::vector<PolicyTable> singles;
  for (std::size_t i = 0; i < mdp.rewards.size(); ++i)
    singles.push_back(optimal_policy(mdp, q_backward(mdp, i)));
  const PolicyTable fused = fuse_policies(singles, w);
  const PolicyTable direct = optimal_policy(mdp, q_backward(mdp, weighted_reward_vector(mdp, w)));
  Theorem1Report rep;
  rep.S = mdp.S();
  rep.T = mdp.T;
  rep.M = static_cast<int>(mdp.rewards.size());
  rep.lambda = mdp.lambda;
  rep.seed = seed;
  rep.max_tv = -1.0;
  for (int t = 0; t < mdp.T; ++t) {
    for (int s = 0; s < mdp.S(); ++s) {
      const double tv = total_variation(fused[t].row(s), direct[t].row(s));
      if (tv > rep.max_tv) {
        rep.max_tv = tv;
        rep.argmax_t = t;
        rep.argmax_s = s;
      }
    }
  }
  return rep;
}

double q_additivity_check(const DiscreteMDP& mdp, const PreferenceWeights& w) {
  const QTable qw = q_backward(mdp, weighted_reward_vector(mdp, w));
  std::vector<QTable> parts;
  for (std::size_t i = 0; i < mdp.rewards.size(); ++i) parts.push_back(q_backward(mdp, i));
  double worst = 0.0;
  for (int t = 0; t < mdp.T; ++t) {
    Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(mdp.S(), mdp.S());
    for (std::size_t i = 0; i < parts.size(); ++i) sum += w[i] * parts[i].Q[t];
    worst = std::max(worst, (qw.Q[t] - sum).cwiseAbs().maxCoeff());
  }
  return worst;
}

namespace {

int draw_index(const Eigen::Ref<const Eigen::RowVectorXd>& cdf, double u) {
  const double* begin = cdf.data();
  const double* end = begin + cdf.size();
  const double* it = std::upper_bound(begin, end, u * cdf[cdf.size() - 1]);
  return static_cast<int>(std::min<std::ptrdiff_t>(it - begin, cdf.size() - 1));
}

Eigen::RowVectorXd cumulative(const Eigen::Ref<const Eigen::RowVectorXd>& p) {
  Eigen::RowVectorXd c(p.size());
  double acc = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) c[i] = (acc += p[i]);
  return c;
}

}  // namespace

double reward_decomposition_check(const DiscreteMDP& mdp, const Eigen::VectorXd& reward,
                                  int n_trajectories, std::uint64_t seed) {
  mdp.validate();
  if (n_trajectories < 1) throw ParameterError("decomposition: n_trajectories must be >= 1");
  const QTable q = q_backward(mdp, reward);
  const int S = mdp.S();
  std::vector<Eigen::MatrixXd> cdf(mdp.T, Eigen::MatrixXd(S, S));
  for (int t = 0; t < mdp.T; ++t)
    for (int s = 0; s < S; ++s) cdf[t].row(s) = cumulative(mdp.kernel_pre[t].row(s));
  const Eigen::RowVectorXd cdf0 = cumulative(mdp.initial.transpose());
  Rng rng = make_stream(seed, StreamTag::kOracle, 1);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  double worst = 0.0;
  for (int n = 0; n < n_trajectories; ++n) {
    int s = draw_index(cdf0, u01(rng));
    double rhs = q.V[0][s];
    for (int t = 0; t < mdp.T; ++t) {
      const int a = draw_index(cdf[t].row(s), u01(rng));
      rhs += q.Q[t](s, a) - q.V[t][s];
      s = a;
    }
    worst = std::max(worst, std::abs(reward[s] - rhs));
  }
  return worst;
}

std::vector<Eigen::VectorXd> state_distributions(const DiscreteMDP& mdp, const PolicyTable& policy) {
  check_policy_shape(mdp, policy, "state_distributions: policy");
  std::vector<Eigen::VectorXd> d(mdp.T + 1);
  d[0] = mdp.initial;
  for (int t = 0; t < mdp.T; ++t) d[t + 1] = policy[t].transpose() * d[t];
  return d;
}

double discrete_kl(const Eigen::Ref<const Eigen::RowVectorXd>& p,
                   const Eigen::Ref<const Eigen::RowVectorXd>& q) {
  if (p.size() != q.size()) throw ParameterError("discrete_kl: size mismatch");
  double kl = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) return std::numeric_limits<double>::infinity();
    kl += p[i] * std::log(p[i] / q[i]);
  }
  return kl;
}

ObjectiveValues objective_values(const DiscreteMDP& mdp, const PolicyTable& policy,
                                 const Eigen::VectorXd& reward) {
  check_reward(mdp, reward);
  const QTable q = q_backward(mdp, reward);
  const auto d_pi = state_distributions(mdp, policy);
  const auto d_pre = state_distributions(mdp, mdp.kernel_pre);
  ObjectiveValues out;
  out.expected_reward = d_pi[mdp.T].dot(reward);
  out.stepkl_objective = mdp.initial.dot(q.V[0]);
  out.rollout_objective = out.expected_reward;
  for (int t = 0; t < mdp.T; ++t) {
    const Eigen::MatrixXd adv = q.advantage(t);
    for (int s = 0; s < mdp.S(); ++s) {
      const double kl = discrete_kl(policy[t].row(s), mdp.kernel_pre[t].row(s));
      if (d_pre[t][s] > 0.0)
        out.stepkl_objective +=
            d_pre[t][s] * (policy[t].row(s).dot(adv.row(s)) - mdp.lambda * kl);
      if (d_pi[t][s] > 0.0) out.rollout_objective -= mdp.lambda * d_pi[t][s] * kl;
    }
  }
  return out;
}

TiltedGaussianCase random_tilted_case(const NoiseSchedule& schedule, std::uint64_t seed,
                                      std::uint64_t index) {
  Rng rng = make_stream(seed, StreamTag::kOracle, 3, index);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  TiltedGaussianCase c;
  c.m = -1.0 + 2.0 * u(rng);
  c.s2 = 0.1 + 1.9 * u(rng);
  c.c = -2.0 + 4.0 * u(rng);
  c.lambda = 0.05 + 0.95 * u(rng);
  c.t = std::uniform_int_distribution<int>(1, schedule.T())(rng);
  c.x_t = -2.0 + 4.0 * u(rng);
  return c;
}

GaussianPosterior exact_reverse_posterior(const NoiseSchedule& schedule, double m, double s2, int t,
                                          double x_t) {
  if (t < 1 || t > schedule.T())
    throw ParameterError("exact_reverse_posterior: t=" + std::to_string(t) + " outside [1, T]");
  if (!(s2 > 0.0)) throw ParameterError("exact_reverse_posterior: data variance must be > 0");
  const double ab = schedule.alpha_bar(t - 1);
  const double a = schedule.alpha(t);
  const double b = schedule.beta(t);
  const double v = ab * s2 + 1.0 - ab;
  const double m_prev = std::sqrt(ab) * m;
  const double k = std::sqrt(a) * v / (a * v + b);
  GaussianPosterior p;
  p.variance = v * b / (a * v + b);
  p.mean = Eigen::VectorXd::Constant(1, m_prev + k * (x_t - std::sqrt(a) * m_prev));
  return p;
}

GaussianPosterior analytic_tilted_posterior(const NoiseSchedule& schedule,
                                            const TiltedGaussianCase& c) {
  if (!(c.lambda > 0.0)) throw ParameterError("analytic_tilted_posterior: lambda must be > 0");
  GaussianPosterior p = exact_reverse_posterior(schedule, c.m, c.s2, c.t, c.x_t);
  const double ab = schedule.alpha_bar(c.t - 1);
  const double g = std::sqrt(ab) * c.s2 / (ab * c.s2 + 1.0 - ab);
  p.mean[0] += p.variance * c.c * g / c.lambda;
  return p;
}

GaussianPosterior analytic_tilted_posterior(const NoiseSchedule& schedule, double m, double s2,
                                            const RewardFn& reward, double lambda, int t,
                                            double x_t) {
  double slope = 0.0;
  if (const auto* ax = std::get_if<reward::Axis>(&reward.kind()); ax && ax->axis == 0)
    slope = ax->c;
  else if (const auto* lin = std::get_if<reward::Linear>(&reward.kind()); lin && lin->c.size() == 1)
    slope = lin->c[0];
  else
    throw ParameterError("analytic_tilted_posterior: reward must be linear in a 1-D x0, got " +
                         reward.describe());
  return analytic_tilted_posterior(schedule, {m, s2, slope, lambda, t, x_t});
}

namespace {

struct Moments {
  double log_mass;
  double mean;
  double var;
};

/// Trapezoid moments of exp(f) on [lo, hi] with max subtraction.
template <typename F>
Moments log_moments(F&& f, double lo, double hi, int nodes) {
  const double h = (hi - lo) / (nodes - 1);
  std::vector<double> lf(nodes);
  double mx = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < nodes; ++i) {
    lf[i] = f(lo + h * i);
    mx = std::max(mx, lf[i]);
  }
  double m0 = 0.0, m1 = 0.0;
  for (int i = 0; i < nodes; ++i) {
    const double wt = (i == 0 || i == nodes - 1 ? 0.5 : 1.0) * std::exp(lf[i] - mx);
    m0 += wt;
    m1 += wt * (lo + h * i);
  }
  const double mean = m1 / m0;
  double m2 = 0.0;
  for (int i = 0; i < nodes; ++i) {
    const double x = lo + h * i - mean;
    m2 += (i == 0 || i == nodes - 1 ? 0.5 : 1.0) * std::exp(lf[i] - mx) * x * x;
  }
  return {mx + std::log(m0 * h), mean, m2 / m0};
}

/// Coarse pass, then two passes of +-12 standard deviations around the mass.
template <typename F>
Moments refine(F&& f, double lo, double hi, int coarse, int nodes) {
  Moments mo = log_moments(f, lo, hi, coarse);
  double h = (hi - lo) / (coarse - 1);
  for (int pass = 0; pass < 2; ++pass) {
    // An under-resolved peak reports a tiny variance; keep a few old spacings.
    const double half = std::max(12.0 * std::sqrt(mo.var), 4.0 * h);
    mo = log_moments(f, mo.mean - half, mo.mean + half, nodes);
    h = 2.0 * half / (nodes - 1);
  }
  return mo;
}

double log_normal(double x, double mean, double var) {
  const double d = x - mean;
  return -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * d * d / var;
}

}  // namespace

GaussianPosterior quadrature_tilted_posterior(const NoiseSchedule& schedule,
                                              const TiltedGaussianCase& c, int nodes) {
  if (c.t < 1 || c.t > schedule.T()) throw ParameterError("quadrature: t outside [1, T]");
  if (!(c.s2 > 0.0) || !(c.lambda > 0.0)) throw ParameterError("quadrature: need s2 > 0, lambda > 0");
  if (nodes < 101) throw ParameterError("quadrature: at least 101 nodes");
  const double ab = schedule.alpha_bar(c.t - 1);
  const double a = schedule.alpha(c.t);
  const double b = schedule.beta(c.t);
  const double sd = std::sqrt(c.s2);
  const int inner = std::max(201, nodes / 4);

  // log p(z) and Q(z) = E[c x0 | x_{t-1} = z] by integrating over x0.
  const auto prior_and_q = [&](double z, double& q) {
    if (ab == 1.0) {
      q = c.c * z;
      return log_normal(z, c.m, c.s2);
    }
    const double noise = 1.0 - ab;
    const auto joint = [&](double x0) {
      return log_normal(x0, c.m, c.s2) + log_normal(z, std::sqrt(ab) * x0, noise);
    };
    const Moments mo = refine(joint, c.m - 12.0 * sd, c.m + 12.0 * sd, inner, inner);
    q = c.c * mo.mean;
    return mo.log_mass;
  };
  const auto tilted = [&](double z) {
    double q = 0.0;
    const double lp = prior_and_q(z, q);
    return lp + log_normal(c.x_t, std::sqrt(a) * z, b) + q / c.lambda;
  };
  const double centre = c.x_t / std::sqrt(a);
  const double half = 8.0 + 12.0 * sd + std::abs(c.m - centre);
  const Moments mo = refine(tilted, centre - half, centre + half, 1201, nodes);
  GaussianPosterior p;
  p.mean = Eigen::VectorXd::Constant(1, mo.mean);
  p.variance = mo.var;
  return p;
}

}  // namespace msdda
