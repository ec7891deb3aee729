// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "msdda/diffusion.hpp"
#include "msdda/rewards.hpp"
#include "msdda/tape.hpp"

namespace msdda {

struct PreferencePair {
  Eigen::VectorXd x0_win;
  Eigen::VectorXd x0_lose;
  double margin = 0.0;  // r(win) - r(lose) >= 0
};

struct DpoHyper {
  double lambda = 0.1;  // KL strength
  double omega = 1.0;   // constant weighting omega(snr_t)
  int T_train = 0;      // 0 means the schedule's T
  double lr = 1e-4;
  int steps = 1000;
  int batch = 64;
  std::uint64_t seed = 0;
};

/// Draws 2 * n_pairs samples from `model`, pairs consecutive samples and puts
/// the higher-reward one first. Ties keep the first sample as the winner.
std::vector<PreferencePair> make_pairs(const EpsilonModel& model, const RewardFn& reward,
                                       int n_pairs, std::uint64_t seed, int threads = 1);

void write_pairs_csv(const std::filesystem::path& path, const std::vector<PreferencePair>& pairs);
std::vector<PreferencePair> read_pairs_csv(const std::filesystem::path& path, int dim);

/// Per-pair randomness of the loss: t ~ U{1..T} and the two forward-process
/// noises. Pair i of a batch draws from stream (seed, i).
struct DpoDraw {
  int t = 1;
  Eigen::VectorXd eps_win;
  Eigen::VectorXd eps_lose;
};
std::vector<DpoDraw> draw_dpo_noise(std::size_t n, int dim, int T, std::uint64_t seed);

/// Records the step-level DPO loss
///   -mean_i log sigmoid(-lambda T omega (D_win - D_lose - D_diff))
/// on `tape`, where D_* = ||eps - eps_theta||^2 - ||eps - eps_pre||^2 at x_t
/// and D_diff = ||eps_theta - eps_pre||^2 (win) - (same, lose). Only `theta`
/// leaves are trainable; the reference network enters as constants.
/// If `z_out` is given it receives the per-pair sigmoid arguments.
Var record_step_dpo_loss(Tape& tape, const MlpTapeParams& theta, const MlpParams& pre,
                         const std::vector<PreferencePair>& batch,
                         const std::vector<DpoDraw>& draws, const NoiseSchedule& schedule,
                         const DpoHyper& hyper, Eigen::RowVectorXd* z_out = nullptr);

struct DpoLoss {
  double loss = 0.0;
  Eigen::VectorXd grad;     // d loss / d theta, flat layout
  Eigen::RowVectorXd z;     // per-pair sigmoid arguments
};

/// Loss and gradient with respect to theta. Deterministic in (seed, pair index).
DpoLoss step_dpo_loss(const MlpParams& theta, const MlpParams& pre,
                      const std::vector<PreferencePair>& batch, const NoiseSchedule& schedule,
                      const DpoHyper& hyper, std::uint64_t seed);

struct GradcheckReport {
  double loss = 0.0;          // loss at the evaluation point
  double max_rel_error = 0.0; // |g - fd| / max(|g|, |fd|, 1e-6)
  std::size_t worst_index = 0;
  int coords = 0;
};

/// Compares step_dpo_loss gradients at theta against central differences
/// with step h on `coords` random parameter coordinates.
GradcheckReport gradcheck_dpo(const MlpParams& theta, const MlpParams& pre,
                              const std::vector<PreferencePair>& batch,
                              const NoiseSchedule& schedule, const DpoHyper& hyper,
                              std::uint64_t seed, int coords = 100, double h = 1e-6);

/// Adam on the step-level DPO loss starting from the reference parameters.
/// The returned model shares the reference schedule and carries `eta`.
EpsilonModel finetune_dpo(const EpsilonModel& pre, const std::vector<PreferencePair>& pairs,
                          const DpoHyper& hyper, double eta,
                          const std::function<void(int step, double loss)>& on_log = {},
                          int log_every = 100);

/// Parameter interpolation baseline: params w*a + (1-w)*b, eta likewise.
EpsilonModel reward_soup(const EpsilonModel& model_a, const EpsilonModel& model_b, double w);

}  // namespace msdda
