// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>

#include <Eigen/Core>

namespace msdda {

enum class ScheduleKind { kLinear, kCosine };

std::string_view to_string(ScheduleKind kind);
ScheduleKind parse_schedule_kind(std::string_view name);

/// The four numbers a schedule is rebuilt from. This is what checkpoints and
/// configs store; the coefficient arrays are always recomputed.
struct ScheduleSpec {
  ScheduleKind kind = ScheduleKind::kLinear;
  int T = 100;
  double beta_start = 1e-4;
  double beta_end = 0.02;

  friend bool operator==(const ScheduleSpec&, const ScheduleSpec&) = default;
};

/// Diffusion coefficients over steps t = 1..T. All accessors take the 1-based
/// step index; alpha_bar(0) is defined as 1.
class NoiseSchedule {
 public:
  explicit NoiseSchedule(const ScheduleSpec& spec);

  const ScheduleSpec& spec() const { return spec_; }
  int T() const { return spec_.T; }

  double beta(int t) const { return beta_[index(t)]; }
  double alpha(int t) const { return alpha_[index(t)]; }
  double alpha_bar(int t) const { return t == 0 ? 1.0 : alpha_bar_[index(t)]; }
  double snr(int t) const { return snr_[index(t)]; }
  /// Posterior variance ((1 - abar_{t-1}) / (1 - abar_t)) beta_t; zero at t = 1.
  double beta_tilde(int t) const { return beta_tilde_[index(t)]; }

  const Eigen::ArrayXd& betas() const { return beta_; }
  const Eigen::ArrayXd& alphas() const { return alpha_; }
  const Eigen::ArrayXd& alpha_bars() const { return alpha_bar_; }
  const Eigen::ArrayXd& snrs() const { return snr_; }
  const Eigen::ArrayXd& beta_tildes() const { return beta_tilde_; }

 private:
  Eigen::Index index(int t) const;

  ScheduleSpec spec_;
  Eigen::ArrayXd beta_, alpha_, alpha_bar_, snr_, beta_tilde_;
};

NoiseSchedule build_schedule(int T, ScheduleKind kind, double beta_start, double beta_end);

/// Signal-to-noise ratio abar_t / (1 - abar_t).
double snr(const NoiseSchedule& schedule, int t);

}  // namespace msdda
