// SPDX-License-Identifier: Apache-2.0
#include "msdda/schedule.hpp"

#include <cmath>
#include <numbers>

#include "msdda/errors.hpp"

namespace msdda {

std::string_view to_string(ScheduleKind kind) {
  return kind == ScheduleKind::kLinear ? "linear" : "cosine";
}

ScheduleKind parse_schedule_kind(std::string_view name) {
  if (name == "linear") return ScheduleKind::kLinear;
  if (name == "cosine") return ScheduleKind::kCosine;
  throw ParameterError("schedule.kind: unknown schedule '" + std::string(name) + "'");
}

namespace {

Eigen::ArrayXd cosine_betas(int T) {
  constexpr double s = 0.008;
  auto f = [&](double t) {
    const double c = std::cos((t / T + s) / (1.0 + s) * std::numbers::pi / 2.0);
    return c * c;
  };
  Eigen::ArrayXd beta(T);
  for (int t = 1; t <= T; ++t) {
    const double b = 1.0 - f(t) / f(t - 1);
    beta[t - 1] = std::min(b, 0.999);
  }
  return beta;
}

}  // namespace

NoiseSchedule::NoiseSchedule(const ScheduleSpec& spec) : spec_(spec) {
  const int T = spec.T;
  if (T < 1) throw ParameterError("schedule.T: must be >= 1, got " + std::to_string(T));
  if (spec.kind == ScheduleKind::kLinear) {
    if (!(spec.beta_start > 0.0 && spec.beta_start < 1.0))
      throw ParameterError("schedule.beta_start: must lie in (0, 1)");
    if (!(spec.beta_end >= spec.beta_start && spec.beta_end < 1.0))
      throw ParameterError("schedule.beta_end: must lie in [beta_start, 1)");
    beta_.resize(T);
    for (int i = 0; i < T; ++i) {
      const double frac = T == 1 ? 0.0 : static_cast<double>(i) / (T - 1);
      beta_[i] = spec.beta_start + (spec.beta_end - spec.beta_start) * frac;
    }
  } else {
    beta_ = cosine_betas(T);
  }

  alpha_ = 1.0 - beta_;
  alpha_bar_.resize(T);
  snr_.resize(T);
  beta_tilde_.resize(T);
  double running = 1.0;
  for (int i = 0; i < T; ++i) {
    const double prev = running;
    running *= alpha_[i];
    alpha_bar_[i] = running;
    snr_[i] = running / (1.0 - running);
    beta_tilde_[i] = i == 0 ? 0.0 : (1.0 - prev) / (1.0 - running) * beta_[i];
  }
  if (!(alpha_bar_[T - 1] > 0.0)) throw ParameterError("schedule: alpha_bar_T underflowed to 0");
}

Eigen::Index NoiseSchedule::index(int t) const {
  if (t < 1 || t > spec_.T)
    throw ParameterError("step t=" + std::to_string(t) + " outside [1, " +
                         std::to_string(spec_.T) + "]");
  return t - 1;
}

NoiseSchedule build_schedule(int T, ScheduleKind kind, double beta_start, double beta_end) {
  return NoiseSchedule(ScheduleSpec{kind, T, beta_start, beta_end});
}

double snr(const NoiseSchedule& schedule, int t) { return schedule.snr(t); }

}  // namespace msdda
