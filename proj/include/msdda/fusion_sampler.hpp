// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "msdda/diffusion.hpp"
#include "msdda/gaussian.hpp"
#include "msdda/rewards.hpp"

namespace msdda {

/// Aligned models sharing one schedule, with preference weights.
class FusionEnsemble {
 public:
  FusionEnsemble(std::vector<EpsilonModel> models, PreferenceWeights w);

  std::size_t size() const { return models_.size(); }
  const EpsilonModel& model(std::size_t i) const { return models_[i]; }
  const PreferenceWeights& weights() const { return w_; }
  const NoiseSchedule& schedule() const { return models_.front().schedule(); }
  int data_dim() const { return models_.front().data_dim(); }

 private:
  std::vector<EpsilonModel> models_;
  PreferenceWeights w_;
};

/// Weighted product of the models' reverse posteriors for t -> t_prev.
/// Models with zero weight are not evaluated.
GaussianPosterior fused_posterior(const FusionEnsemble& ensemble,
                                  const Eigen::Ref<const Eigen::VectorXd>& x_t, int t, int t_prev);

/// One stochastic fused step t -> t - 1 (2 <= t <= T): mu + sigma * z.
Eigen::VectorXd msdda_step(const FusionEnsemble& ensemble,
                           const Eigen::Ref<const Eigen::VectorXd>& x_t, int t,
                           const Eigen::Ref<const Eigen::VectorXd>& z);
/// Same on an explicit grid step t -> t_prev >= 1.
Eigen::VectorXd msdda_step(const FusionEnsemble& ensemble,
                           const Eigen::Ref<const Eigen::VectorXd>& x_t, int t, int t_prev,
                           const Eigen::Ref<const Eigen::VectorXd>& z);

/// Fused ancestral sampling. Uses the same per-sample streams as sample(),
/// so a unit weight vector reproduces the single model bit for bit.
Eigen::MatrixXd msdda_sample(const FusionEnsemble& ensemble, int n, std::uint64_t seed,
                             int threads = 1, int stride = 1);

/// Samples behind one row of a sweep. `w` is empty for the pretrained row.
struct SweepPoint {
  std::string method;
  std::optional<double> w;
  Eigen::MatrixXd samples;
};

struct SweepOptions {
  std::vector<double> weights;
  int n = 2048;
  std::uint64_t seed = 0;
  int threads = 1;
  int stride = 1;
};

/// Rows: pretrained, model_a (w = 1), model_b (w = 0), then msdda and soup
/// at every w in order. All rows share the sampling seed.
std::vector<SweepPoint> sweep_samples(const EpsilonModel& pretrained, const EpsilonModel& model_a,
                                      const EpsilonModel& model_b, const SweepOptions& options);

struct SweepRow {
  std::string method;
  std::optional<double> w;
  double mean_r1 = 0.0;
  double se_r1 = 0.0;
  double mean_r2 = 0.0;
  double se_r2 = 0.0;
  std::size_t n = 0;

  friend bool operator==(const SweepRow&, const SweepRow&) = default;
};

std::vector<SweepRow> summarize_sweep(const std::vector<SweepPoint>& points, const RewardFn& r1,
                                      const RewardFn& r2);

std::vector<SweepRow> pareto_sweep(const EpsilonModel& pretrained, const EpsilonModel& model_a,
                                   const EpsilonModel& model_b, const RewardFn& r1,
                                   const RewardFn& r2, const SweepOptions& options);

inline constexpr const char* kSweepCsvHeader = "method,w,mean_r1,se_r1,mean_r2,se_r2,n";
std::string format_sweep_csv(const std::vector<SweepRow>& rows);
std::vector<SweepRow> parse_sweep_csv(const std::string& text);

}  // namespace msdda
