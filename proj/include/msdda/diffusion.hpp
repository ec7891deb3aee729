// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "msdda/gaussian.hpp"
#include "msdda/nn.hpp"
#include "msdda/schedule.hpp"

namespace msdda {

/// Variance used for the deterministic final step (t = 1), where the DDPM
/// posterior variance vanishes.
inline constexpr double kFinalStepVariance = 1e-12;

/// A noise predictor bound to the schedule it was trained against and its
/// denoising-variance factor eta (posterior variance eta^2 * beta_tilde_t).
class EpsilonModel {
 public:
  EpsilonModel(MlpParams params, const NoiseSchedule& schedule, double eta);

  const MlpParams& params() const { return params_; }
  const NoiseSchedule& schedule() const { return schedule_; }
  double eta() const { return eta_; }
  int data_dim() const { return params_.arch.data_dim; }

  /// epsilon_theta(x_t, t). Counts calls for instrumentation.
  Eigen::VectorXd predict(const Eigen::Ref<const Eigen::VectorXd>& x, int t) const;
  const Eigen::VectorXd& embedding(int t) const { return embeddings_[t - 1]; }

  std::uint64_t forward_calls() const { return calls_->load(std::memory_order_relaxed); }
  void reset_forward_calls() const { calls_->store(0); }

 private:
  MlpParams params_;
  NoiseSchedule schedule_;
  double eta_;
  std::vector<Eigen::VectorXd> embeddings_;
  std::shared_ptr<std::atomic<std::uint64_t>> calls_;
};

enum class DatasetKind { kRing8, kGauss1, kCustomFile };

struct DatasetSpec {
  DatasetKind kind = DatasetKind::kRing8;
  int n = 20000;
  std::uint64_t seed = 0;
  double scale = 1.0;
  std::filesystem::path path;  // custom-file only
};

/// Training points, one per column.
struct Dataset2D {
  DatasetSpec spec;
  Eigen::MatrixXd points;
};

std::string to_string(DatasetKind kind);
DatasetKind parse_dataset_kind(const std::string& name);

/// ring8: 8 Gaussians (std 0.1 * scale) on a circle of radius 2 * scale.
/// gauss1: N(0, scale^2 I) in 2-D. custom-file: CSV, one point per line.
Dataset2D make_dataset(const DatasetSpec& spec);
Dataset2D load_dataset_csv(const std::filesystem::path& path);
/// The eight ring8 mode centers for a given scale, one per column.
Eigen::MatrixXd ring8_centers(double scale = 1.0);

/// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) noise.
Eigen::VectorXd forward_sample(const NoiseSchedule& schedule,
                               const Eigen::Ref<const Eigen::VectorXd>& x0, int t,
                               const Eigen::Ref<const Eigen::VectorXd>& noise);

/// Coefficients of one reverse step t -> t_prev. For t_prev = t - 1 these
/// are the schedule's own alpha_t, beta_t, beta_tilde_t; for a strided grid
/// they are the subsampled equivalents built from abar_t / abar_{t_prev}.
struct StepCoefficients {
  double alpha;
  double beta;
  double alpha_bar;
  double beta_tilde;
};
StepCoefficients step_coefficients(const NoiseSchedule& schedule, int t, int t_prev);

/// (1 / sqrt(alpha)) (x_t - beta / sqrt(1 - abar_t) * epsilon).
Eigen::VectorXd reverse_mean(const EpsilonModel& model, const Eigen::Ref<const Eigen::VectorXd>& x_t,
                             int t, int t_prev);
inline Eigen::VectorXd reverse_mean(const EpsilonModel& model,
                                    const Eigen::Ref<const Eigen::VectorXd>& x_t, int t) {
  return reverse_mean(model, x_t, t, t - 1);
}

/// p(x_{t_prev} | x_t): reverse_mean with variance eta^2 * beta_tilde, or
/// kFinalStepVariance on the final step to t_prev = 0.
GaussianPosterior reverse_posterior(const EpsilonModel& model,
                                    const Eigen::Ref<const Eigen::VectorXd>& x_t, int t, int t_prev);
inline GaussianPosterior reverse_posterior(const EpsilonModel& model,
                                           const Eigen::Ref<const Eigen::VectorXd>& x_t, int t) {
  return reverse_posterior(model, x_t, t, t - 1);
}
/// The variance reverse_posterior would return, without evaluating the network.
double reverse_variance(const NoiseSchedule& schedule, double eta, int t, int t_prev);

/// Descending inference grid starting at T and always ending at 1. stride 1
/// gives every step.
std::vector<int> timestep_grid(int T, int stride = 1);

struct TrainOptions {
  int steps = 20000;
  double lr = 1e-3;
  int batch = 256;
  std::uint64_t seed = 0;
  /// Called every `log_every` steps with the running mean loss.
  std::function<void(int step, double loss)> on_log;
  int log_every = 100;
};

/// Standard epsilon-matching DDPM training with Adam, t ~ U{1..T}.
/// Throws NumericError on a non-finite loss.
EpsilonModel pretrain(const Dataset2D& data, const MlpArchitecture& arch,
                      const NoiseSchedule& schedule, const TrainOptions& options);

/// Mean epsilon-matching loss over a fixed batch (for monitoring).
double epsilon_loss(const MlpParams& params, const NoiseSchedule& schedule,
                    const Eigen::MatrixXd& x0, std::uint64_t seed);

/// Reverse step provider for the ancestral sampler: returns the Gaussian for
/// x_{t_prev} given x_t.
using StepFn = std::function<GaussianPosterior(const Eigen::VectorXd& x_t, int t, int t_prev)>;

/// Shared ancestral loop. Sample i draws from its own stream (seed, i):
/// x_T ~ N(0, I), one N(0, I) draw per stochastic step, and the final step to
/// t = 0 returns the mean. Output is one sample per column, identical for any
/// thread count.
Eigen::MatrixXd ancestral_sample(int dim, int n, std::uint64_t seed, const std::vector<int>& grid,
                                 const StepFn& step, int threads = 1);

/// Single-model ancestral sampling.
Eigen::MatrixXd sample(const EpsilonModel& model, int n, std::uint64_t seed, int threads = 1,
                       int stride = 1);
/// The i-th sample of sample(model, n, seed) for any n > i.
Eigen::VectorXd sample_one(const EpsilonModel& model, std::uint64_t seed, std::uint64_t index,
                           int stride = 1);

}  // namespace msdda
