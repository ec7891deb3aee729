// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "msdda/alignment.hpp"
#include "msdda/errors.hpp"
#include "msdda/fusion_sampler.hpp"
#include "msdda/rng.hpp"
#include "support/oracles.hpp"

using namespace msdda;

namespace {

MlpArchitecture small_arch() {
  MlpArchitecture a;
  a.t_embed_dim = 4;
  a.hidden = {6};
  return a;
}

NoiseSchedule small_schedule() { return build_schedule(25, ScheduleKind::kLinear, 1e-3, 0.15); }

/// 1-D model whose prediction is k x + b at every step.
EpsilonModel affine_model(double k, double b, double eta, const NoiseSchedule& s) {
  MlpArchitecture arch;
  arch.data_dim = 1;
  arch.t_embed_dim = 2;
  arch.hidden = {};
  MlpParams p = zero_params(arch);
  p.weight(0)(0, 0) = k;
  p.bias(0)[0] = b;
  return EpsilonModel(p, s, eta);
}

struct ChainMoments {
  double mean;
  double variance;
};

/// Closed-form marginal of the fused chain for affine models: every fused
/// reverse step is x_{t-1} = A x_t + B + sqrt(v) z.
ChainMoments fused_affine_chain(const std::vector<double>& k, const std::vector<double>& b,
                                const std::vector<double>& eta, const std::vector<double>& w,
                                const NoiseSchedule& s) {
  double m = 0.0, var = 1.0;
  for (int t = s.T(); t >= 1; --t) {
    const double c = s.beta(t) / std::sqrt(1.0 - s.alpha_bar(t));
    const double r = 1.0 / std::sqrt(s.alpha(t));
    double prec = 0.0, A = 0.0, B = 0.0;
    for (std::size_t i = 0; i < k.size(); ++i) {
      if (w[i] == 0.0) continue;
      const double v_i = t == 1 ? 1.0 : eta[i] * eta[i] * s.beta_tilde(t);
      const double p_i = w[i] / v_i;
      prec += p_i;
      A += p_i * r * (1.0 - c * k[i]);
      B += p_i * r * (-c * b[i]);
    }
    A /= prec;
    B /= prec;
    m = A * m + B;
    var = A * A * var + (t == 1 ? 0.0 : 1.0 / prec);
  }
  return {m, var};
}

}  // namespace

TEST_CASE("ensemble validation") {
  const NoiseSchedule s = small_schedule();
  const EpsilonModel a(init_params(small_arch(), 1), s, 1.0);
  const EpsilonModel c(init_params(small_arch(), 1), build_schedule(25, ScheduleKind::kCosine, 0, 0), 1.0);
  CHECK_THROWS_AS(FusionEnsemble({a, c}, PreferenceWeights{0.5, 0.5}), ParameterError);
  CHECK_THROWS_AS(FusionEnsemble({a}, PreferenceWeights{0.5, 0.5}), ParameterError);
  CHECK_THROWS_AS(FusionEnsemble({}, PreferenceWeights{1.0}), ParameterError);
}

TEST_CASE("msdda_step reduces to single-model steps") {
  const NoiseSchedule s = small_schedule();
  const EpsilonModel a(init_params(small_arch(), 1), s, 1.0);
  const EpsilonModel b(init_params(small_arch(), 2), s, 0.8);
  const EpsilonModel a_copy(a.params(), s, 1.0);
  Rng rng = make_stream(1, {1});
  for (int t = 2; t <= s.T(); t += 4) {
    const Eigen::VectorXd x = standard_normal(rng, 2), z = standard_normal(rng, 2);
    const auto single = reverse_posterior(a, x, t);
    const Eigen::VectorXd expect = single.mean + std::sqrt(single.variance) * z;
    CHECK(msdda_step(FusionEnsemble({a}, PreferenceWeights{1.0}), x, t, z) == expect);
    CHECK(msdda_step(FusionEnsemble({a, b}, PreferenceWeights{1.0, 0.0}), x, t, z) == expect);
    CHECK(msdda_step(FusionEnsemble({a, a_copy}, PreferenceWeights{0.3, 0.7}), x, t, z) == expect);
  }
  const FusionEnsemble e({a, b}, PreferenceWeights{0.5, 0.5});
  CHECK_THROWS_AS(msdda_step(e, Eigen::Vector2d::Zero(), 1, Eigen::Vector2d::Zero()), ParameterError);
  CHECK_THROWS_AS(msdda_step(e, Eigen::Vector2d::Zero(), s.T() + 1, Eigen::Vector2d::Zero()),
                  ParameterError);
}

TEST_CASE("unit weights reproduce single-model sampling without touching the other model") {
  const NoiseSchedule s = small_schedule();
  const EpsilonModel a(init_params(small_arch(), 1), s, 1.0);
  const EpsilonModel b(init_params(small_arch(), 2), s, 0.8);
  for (int stride : {1, 4}) {
    a.reset_forward_calls();
    b.reset_forward_calls();
    const Eigen::MatrixXd fused = msdda_sample(FusionEnsemble({a, b}, PreferenceWeights{1.0, 0.0}), 64, 9, 3, stride);
    CHECK(b.forward_calls() == 0);
    CHECK(a.forward_calls() > 0);
    CHECK(fused == sample(a, 64, 9, 1, stride));

    a.reset_forward_calls();
    const Eigen::MatrixXd fused_b = msdda_sample(FusionEnsemble({a, b}, PreferenceWeights{0.0, 1.0}), 64, 9, 2, stride);
    CHECK(a.forward_calls() == 0);
    CHECK(fused_b == sample(b, 64, 9, 1, stride));
  }
}

TEST_CASE("fused sampling is per-sample and thread independent") {
  const NoiseSchedule s = small_schedule();
  const FusionEnsemble e({EpsilonModel(init_params(small_arch(), 1), s, 1.0),
                          EpsilonModel(init_params(small_arch(), 2), s, 0.8)},
                         PreferenceWeights{0.4, 0.6});
  const Eigen::MatrixXd full = msdda_sample(e, 40, 3, 1);
  CHECK(full == msdda_sample(e, 40, 3, 5));
  CHECK(full.leftCols(7) == msdda_sample(e, 7, 3, 2));
}

TEST_CASE("fused variance lies between the contributing variances") {
  const NoiseSchedule s = small_schedule();
  const EpsilonModel a(init_params(small_arch(), 1), s, 1.0);
  const EpsilonModel b(init_params(small_arch(), 2), s, 0.8);
  Rng rng = make_stream(2, {2});
  for (double w : {0.1, 0.5, 0.9}) {
    const FusionEnsemble e({a, b}, PreferenceWeights::pair(w));
    for (int t = 2; t <= s.T(); ++t) {
      const auto p = fused_posterior(e, standard_normal(rng, 2), t, t - 1);
      const double va = reverse_variance(s, 1.0, t, t - 1), vb = reverse_variance(s, 0.8, t, t - 1);
      CHECK(p.variance >= std::min(va, vb) * (1 - 1e-15));
      CHECK(p.variance <= std::max(va, vb) * (1 + 1e-15));
    }
  }
}

TEST_CASE("two affine models: fused chain matches the closed-form marginal") {
  const NoiseSchedule s = build_schedule(50, ScheduleKind::kLinear, 1e-3, 0.1);
  const std::vector<double> k{0.3, -0.2}, b{-0.6, 0.5}, eta{1.0, 0.8};
  const EpsilonModel ma = affine_model(k[0], b[0], eta[0], s);
  const EpsilonModel mb = affine_model(k[1], b[1], eta[1], s);
  const int n = 100000;
  for (double w : {0.25, 0.6}) {
    const FusionEnsemble e({ma, mb}, PreferenceWeights::pair(w));
    const Eigen::MatrixXd x = msdda_sample(e, n, 21, 4);
    const ChainMoments ref = fused_affine_chain(k, b, eta, {w, 1.0 - w}, s);
    const MeanSe ms = mean_se(x.row(0).transpose());
    const double var = ms.se * ms.se * n;
    CHECK(std::abs(ms.mean - ref.mean) <= 5.0 * std::sqrt(ref.variance / n));
    CHECK(std::abs(var - ref.variance) <= 5.0 * ref.variance * std::sqrt(2.0 / (n - 1)));
  }

  // Fused means interpolate monotonically between the two aligned chains.
  double prev = -1e300;
  for (int i = 0; i <= 10; ++i) {
    const double w = i / 10.0;
    const double m = fused_affine_chain(k, b, eta, {w, 1.0 - w}, s).mean;
    CHECK(m >= prev);
    prev = m;
  }
  const auto rows = pareto_sweep(ma, ma, mb, RewardFn::axis(0), RewardFn::axis(0),
                                 SweepOptions{{0.0, 0.25, 0.5, 0.75, 1.0}, 4000, 5, 4, 1});
  double last = -1e300;
  for (const auto& r : rows) {
    if (r.method != "msdda") continue;
    CHECK(r.mean_r1 >= last);
    last = r.mean_r1;
  }
}

TEST_CASE("pareto sweep shape and endpoints") {
  const NoiseSchedule s = small_schedule();
  const EpsilonModel pre(init_params(small_arch(), 0), s, 1.0);
  const EpsilonModel a(init_params(small_arch(), 1), s, 1.0);
  const EpsilonModel b(init_params(small_arch(), 2), s, 0.8);
  SweepOptions opt{{0.0, 0.5, 1.0}, 32, 4, 2, 1};
  const auto rows = pareto_sweep(pre, a, b, RewardFn::axis(0), RewardFn::axis(1), opt);
  CHECK(rows.size() == 3 + 2 * opt.weights.size());
  CHECK(rows[0].method == "pretrained");
  CHECK(!rows[0].w.has_value());
  auto find = [&](const std::string& m, double w) {
    for (const auto& r : rows)
      if (r.method == m && r.w == w) return r;
    FAIL("missing row");
    return SweepRow{};
  };
  auto same_stats = [](SweepRow x, const SweepRow& y) {
    x.method = y.method;
    x.w = y.w;
    return x == y;
  };
  CHECK(same_stats(find("msdda", 1.0), find("model_a", 1.0)));
  CHECK(same_stats(find("msdda", 0.0), find("model_b", 0.0)));
  CHECK(same_stats(find("soup", 1.0), find("model_a", 1.0)));
  CHECK(same_stats(find("soup", 0.0), find("model_b", 0.0)));

  const std::string csv = format_sweep_csv(rows);
  CHECK(csv.rfind(std::string(kSweepCsvHeader) + "\n", 0) == 0);
  CHECK(parse_sweep_csv(csv) == rows);
  CHECK(format_sweep_csv(parse_sweep_csv(csv)) == csv);

  opt.weights = {1.5};
  CHECK_THROWS_AS(pareto_sweep(pre, a, b, RewardFn::axis(0), RewardFn::axis(1), opt), ParameterError);
}
