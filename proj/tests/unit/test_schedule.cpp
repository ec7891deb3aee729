// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <vector>

#include "msdda/errors.hpp"
#include "msdda/schedule.hpp"
#include "support/oracles.hpp"

using namespace msdda;

TEST_CASE("single step schedule") {
  const NoiseSchedule s = build_schedule(1, ScheduleKind::kLinear, 0.5, 0.5);
  CHECK(s.alpha(1) == 0.5);
  CHECK(s.alpha_bar(1) == 0.5);
  CHECK(snr(s, 1) == 1.0);
  CHECK(s.beta_tilde(1) == 0.0);
}

TEST_CASE("two step linear schedule") {
  const NoiseSchedule s = build_schedule(2, ScheduleKind::kLinear, 0.1, 0.2);
  CHECK(s.beta(1) == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(s.beta(2) == doctest::Approx(0.2).epsilon(1e-15));
  CHECK(s.alpha_bar(1) == doctest::Approx(0.9).epsilon(1e-14));
  CHECK(s.alpha_bar(2) == doctest::Approx(0.72).epsilon(1e-14));
  CHECK(snr(s, 2) == doctest::Approx(18.0 / 7.0).epsilon(1e-13));
  // beta_tilde_2 = (1 - 0.9) / (1 - 0.72) * 0.2
  CHECK(s.beta_tilde(2) == doctest::Approx(0.1 / 0.28 * 0.2).epsilon(1e-13));
}

TEST_CASE("snr at symmetric and 0.9 points") {
  // abar_1 = 1 - beta_1.
  CHECK(snr(build_schedule(1, ScheduleKind::kLinear, 0.5, 0.5), 1) == 1.0);
  CHECK(snr(build_schedule(1, ScheduleKind::kLinear, 0.1, 0.1), 1) ==
        doctest::Approx(9.0).epsilon(1e-14));
}

TEST_CASE("invariants hold across schedule kinds") {
  const std::vector<NoiseSchedule> schedules = {
      build_schedule(1000, ScheduleKind::kLinear, 1e-4, 0.02),
      build_schedule(100, ScheduleKind::kLinear, 1e-4, 0.02),
      build_schedule(50, ScheduleKind::kCosine, 0.0, 0.0),
      build_schedule(7, ScheduleKind::kLinear, 0.05, 0.3),
  };
  for (const auto& s : schedules) {
    std::vector<double> beta;
    for (int t = 1; t <= s.T(); ++t) beta.push_back(s.beta(t));
    const auto naive = oracles::naive_alpha_bar(beta);
    CHECK(s.alpha_bar(0) == 1.0);
    CHECK(s.beta_tilde(1) == 0.0);
    CHECK(s.alpha_bar(s.T()) > 0.0);
    for (int t = 1; t <= s.T(); ++t) {
      CHECK(s.beta(t) > 0.0);
      CHECK(s.beta(t) < 1.0);
      CHECK(std::abs(s.alpha_bar(t) - naive[t - 1]) <= 1e-15 * naive[t - 1]);
      const double ab = s.alpha_bar(t);
      CHECK(std::abs(s.snr(t) - ab / (1.0 - ab)) <= 1e-12 * s.snr(t));
      if (t > 1) {
        CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
        CHECK(s.snr(t) < s.snr(t - 1));
        CHECK(s.beta_tilde(t) > 0.0);
      }
    }
  }
}

TEST_CASE("cosine betas are clipped") {
  const NoiseSchedule s = build_schedule(10, ScheduleKind::kCosine, 0.0, 0.0);
  for (int t = 1; t <= 10; ++t) CHECK(s.beta(t) <= 0.999);
}

TEST_CASE("invalid schedules name the field") {
  auto message = [](auto&& fn) {
    try {
      fn();
    } catch (const ParameterError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message([] { build_schedule(0, ScheduleKind::kLinear, 1e-4, 0.02); }).find("T") !=
        std::string::npos);
  CHECK(message([] { build_schedule(10, ScheduleKind::kLinear, 0.0, 0.02); }).find("beta_start") !=
        std::string::npos);
  CHECK(message([] { build_schedule(10, ScheduleKind::kLinear, 0.1, 0.05); }).find("beta_end") !=
        std::string::npos);
  CHECK(message([] { build_schedule(10, ScheduleKind::kLinear, 0.1, 1.0); }).find("beta_end") !=
        std::string::npos);
  CHECK_THROWS_AS(parse_schedule_kind("sigmoid"), ParameterError);
}

TEST_CASE("out of range step") {
  const NoiseSchedule s = build_schedule(5, ScheduleKind::kLinear, 1e-3, 0.02);
  CHECK_THROWS_AS(s.beta(0), ParameterError);
  CHECK_THROWS_AS(snr(s, 6), ParameterError);
}
