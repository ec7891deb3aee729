// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <random>

#include <json.hpp>

#include "msdda/csv.hpp"
#include "msdda/errors.hpp"
#include "msdda/harness.hpp"
#include "msdda/rng.hpp"

using namespace msdda;

#ifndef MSDDA_SOURCE_DIR
#define MSDDA_SOURCE_DIR "."
#endif

namespace {

const std::filesystem::path kSource = MSDDA_SOURCE_DIR;

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "msdda_unit" / name;
  std::filesystem::remove_all(dir);
  return dir;
}

ExperimentConfig smoke() { return load_config(kSource / "configs" / "smoke.json"); }

}  // namespace

TEST_CASE("reward kinds") {
  const Eigen::Vector2d x(0.5, -2.0);
  CHECK(RewardFn::axis(1, 3.0)(x) == -6.0);
  CHECK(RewardFn::linear(Eigen::Vector2d(1.0, 2.0))(x) == -3.5);
  CHECK(RewardFn::radial(Eigen::Vector2d(0.5, 0.0))(x) == -4.0);
  CHECK(RewardFn::halfspace(Eigen::Vector2d(1.0, 0.0), 0.5, 2.0)(x) == 0.0);
  CHECK(RewardFn::halfspace(Eigen::Vector2d(0.0, 1.0), 0.0, 1.0)(x) == doctest::Approx(std::tanh(-2.0)));
  Eigen::MatrixXd batch(2, 2);
  batch << 1, 2, 3, 4;
  CHECK(RewardFn::axis(0).evaluate(batch) == Eigen::Vector2d(1, 2));
  CHECK_THROWS_AS(RewardFn::axis(2)(x), ParameterError);
}

TEST_CASE("weighted reward") {
  const std::vector<RewardFn> rs{RewardFn::axis(0), RewardFn::radial(Eigen::Vector2d(1, 1)),
                                 RewardFn::halfspace(Eigen::Vector2d(1, -1), 0.2, 3.0)};
  Rng rng = make_stream(1, {1});
  for (int k = 0; k < 50; ++k) {
    const Eigen::VectorXd x = standard_normal(rng, 2);
    for (std::size_t i = 0; i < 3; ++i)
      CHECK(weighted_reward(rs, PreferenceWeights::unit(3, i))(x) == rs[i](x));
    std::exponential_distribution<double> e(1.0);
    std::vector<double> w{e(rng), e(rng), e(rng)};
    const double sum = w[0] + w[1] + w[2];
    for (double& v : w) v /= sum;
    const PreferenceWeights pw(w);
    const double naive = pw[0] * rs[0](x) + pw[1] * rs[1](x) + pw[2] * rs[2](x);
    CHECK(std::abs(weighted_reward(rs, pw)(x) - naive) <= 1e-15 * std::max(1.0, std::abs(naive)));
    CHECK(weighted_reward({RewardFn::axis(1), RewardFn::axis(1, -1.0)}, PreferenceWeights{0.5, 0.5})(x) == 0.0);
  }
  CHECK_THROWS_AS(weighted_reward(rs, PreferenceWeights{0.5, 0.5}), ParameterError);
}

TEST_CASE("evaluate") {
  Eigen::MatrixXd same(2, 5);
  same.colwise() = Eigen::Vector2d(0.3, 0.7);
  const std::vector<RewardFn> rs{RewardFn::axis(0), RewardFn::axis(1)};
  const EvalReport rep = evaluate(same, rs, {PreferenceWeights{0.5, 0.5}});
  REQUIRE(rep.rows.size() == 3);
  CHECK(rep.rows[0].quantity == "r1");
  CHECK(rep.rows[0].mean == doctest::Approx(0.3));
  CHECK(rep.rows[0].se == 0.0);
  CHECK(rep.rows[2].quantity == "rw");
  CHECK(rep.rows[2].mean == doctest::Approx(0.5));

  Eigen::MatrixXd two(1, 2);
  two << -1.0, 1.0;
  const EvalReport r2 = evaluate(two, {RewardFn::axis(0)}, {});
  CHECK(r2.rows.size() == 1);
  CHECK(r2.rows[0].mean == 0.0);
  CHECK(r2.rows[0].se == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(r2.rows[0].n == 2);

  const EvalReport r3 = evaluate(same, rs, {PreferenceWeights{1, 0}, PreferenceWeights{0.2, 0.8}, PreferenceWeights{0, 1}});
  CHECK(r3.rows.size() == 5);
  CHECK_THROWS_AS(evaluate(Eigen::MatrixXd(2, 0), rs, {}), ParameterError);
}

TEST_CASE("shortest round-trip number formatting") {
  Rng rng = make_stream(3, {3});
  std::uniform_int_distribution<std::uint64_t> bits;
  for (int k = 0; k < 2000; ++k) {
    double v;
    do {
      const std::uint64_t b = bits(rng);
      std::memcpy(&v, &b, sizeof v);
    } while (!std::isfinite(v));
    CHECK(parse_double(format_double(v)) == v);
  }
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0) == "1");
  CHECK_THROWS_AS(parse_double("1.5x"), ParameterError);
}

TEST_CASE("eval csv round trip") {
  std::vector<EvalRecord> recs{
      {"pretrained", std::nullopt, {"rw", {0.1, 0.9}, 0.25, 0.01, 2048}},
      {"msdda", 0.3, {"r1", {}, -1.0 / 3.0, 1e-17, 7}},
      {"soup", 1.0, {"r2", {}, 12345.678, 0.5, 1}},
  };
  const std::string csv = format_eval_csv(recs);
  CHECK(csv.rfind(std::string(kEvalCsvHeader) + "\n", 0) == 0);
  CHECK(parse_eval_csv(csv) == recs);
  CHECK_THROWS_AS(parse_eval_csv("bogus,header\n"), ParameterError);
}

TEST_CASE("default config matches the shipped file") {
  const ExperimentConfig shipped = load_config(kSource / "configs" / "default.json");
  CHECK(config_to_json(shipped) == config_to_json(default_config()));
  const ExperimentConfig c = default_config();
  CHECK(c.objectives.size() == 2);
  CHECK(c.objectives[0].eta == 1.0);
  CHECK(c.objectives[1].eta == 0.8);
  CHECK(c.sweep.weights.size() == 11);
  CHECK(c.sweep.n == 2048);
  CHECK(c.schedule == ScheduleSpec{});
}

TEST_CASE("config parsing") {
  const ExperimentConfig a = parse_config(R"({"objectives": [
      {"name": "a", "reward": {"kind": "axis", "axis": 0}},
      {"name": "b", "reward": {"kind": "linear", "c": [1, 2]}}],
      "sweep": {"weights": [0, 1]}})");
  CHECK(a.objectives[0].pairs_seed == derive_seed(0, "pairs/a"));
  CHECK(a.objectives[1].dpo.seed == derive_seed(0, "dpo/b"));
  CHECK(a.sweep.seed == derive_seed(0, "sweep"));
  CHECK(a.dataset.seed == derive_seed(0, "dataset"));
  CHECK(derive_seed(0, "sweep") != derive_seed(1, "sweep"));
  CHECK(derive_seed(0, "pairs/a") != derive_seed(0, "pairs/b"));

  const std::string text = config_to_json(a);
  CHECK(config_to_json(parse_config(text)) == text);
  const ExperimentConfig over = parse_config(R"({"objectives": [
      {"name": "a", "reward": {"kind": "axis", "axis": 0}},
      {"name": "b", "reward": {"kind": "axis", "axis": 1}}],
      "sweep": {"weights": [0, 1]}})", 5);
  CHECK(over.seed == 5);
  CHECK(over.sweep.seed == derive_seed(5, "sweep"));

  CHECK_THROWS_AS(parse_config(R"({"bogus": 1})"), ParameterError);
  CHECK_THROWS_AS(parse_config("{not json"), ParameterError);
  CHECK_THROWS_AS(parse_config(R"({"sweep": {"weights": [0.5]}})"), ParameterError);
  auto with = [](const std::string& extra) {
    return R"({"objectives": [{"name": "a", "reward": {"kind": "axis", "axis": 0}},
               {"name": "b", "reward": {"kind": "axis", "axis": 1}}], )" + extra + "}";
  };
  CHECK_THROWS_AS(parse_config(with(R"("sweep": {"weights": [1.5]})")), ParameterError);
  CHECK_THROWS_AS(parse_config(with(R"("sweep": {"weights": [0.5]}, "schedule": {"T": 0})")), ParameterError);
  CHECK_THROWS_AS(parse_reward_json(R"({"kind": "cubic"})"), ParameterError);
  CHECK(parse_reward_json(R"({"kind": "radial", "target": [1, 0]})")(Eigen::Vector2d(0, 0)) == -1.0);
}

TEST_CASE("smoke pipeline is deterministic and writes its artifacts") {
  const ExperimentConfig c = smoke();
  const auto d1 = scratch("smoke1"), d2 = scratch("smoke2");
  const RunResult r1 = run_experiment(c, d1, 1);
  const RunResult r2 = run_experiment(c, d2, 4);
  CHECK(!r1.pretrain_cached);
  for (const char* f : {"sweep.csv", "eval.csv", "pairs_r1.csv", "pairs_r2.csv"})
    CHECK(read_text_file(d1 / f) == read_text_file(d2 / f));
  for (const char* f : {"pretrained.json", "aligned_r1.json", "aligned_r2.json", "manifest.json"})
    CHECK(std::filesystem::exists(d1 / f));
  CHECK(!std::filesystem::exists(d1 / "FAILED"));
  CHECK(parse_sweep_csv(read_text_file(d1 / "sweep.csv")) == r1.sweep);
  CHECK(parse_eval_csv(read_text_file(d1 / "eval.csv")) == r1.eval);

  // Manifest names every seed the run consumed.
  const auto manifest = nlohmann::json::parse(read_text_file(d1 / "manifest.json"));
  CHECK(manifest.at("seeds").at("pretrain").get<std::uint64_t>() == c.pretrain.seed);
  CHECK(manifest.at("seeds").at("dataset").get<std::uint64_t>() == c.dataset.seed);
  CHECK(manifest.at("seeds").at("sweep").get<std::uint64_t>() == c.sweep.seed);
  CHECK(manifest.at("seeds").at("pairs/r1").get<std::uint64_t>() == c.objectives[0].pairs_seed);
  CHECK(manifest.at("seeds").at("dpo/r2").get<std::uint64_t>() == c.objectives[1].dpo.seed);
  CHECK(manifest.contains("code_version"));

  // Endpoint rows: fused sampling at w in {0, 1} is the single aligned model.
  auto row = [&](const std::string& m, double w) {
    for (const auto& r : r1.sweep)
      if (r.method == m && r.w == w) return r;
    FAIL("missing row " << m);
    return SweepRow{};
  };
  for (auto [w, single] : {std::pair{1.0, "model_a"}, std::pair{0.0, "model_b"}}) {
    const SweepRow f = row("msdda", w), s = row(single, w);
    CHECK(std::abs(f.mean_r1 - s.mean_r1) <= std::hypot(f.se_r1, s.se_r1));
    CHECK(f.mean_r1 == s.mean_r1);
    CHECK(f.mean_r2 == s.mean_r2);
  }

  // Second run in the same directory reuses the pretrained checkpoint.
  const RunResult again = run_experiment(c, d1, 2);
  CHECK(again.pretrain_cached);
  CHECK(again.sweep == r1.sweep);
}

TEST_CASE("a failing stage leaves a marker") {
  ExperimentConfig c = smoke();
  c.pretrain.steps = 0;
  const auto dir = scratch("failing");
  try {
    run_experiment(c, dir, 1);
    FAIL("expected a stage error");
  } catch (const StageError& e) {
    CHECK(e.stage() == "pretrain");
    CHECK(e.exit_code() == 2);
  }
  CHECK(std::filesystem::exists(dir / "FAILED"));
  CHECK(read_text_file(dir / "FAILED").find("pretrain") != std::string::npos);
}
