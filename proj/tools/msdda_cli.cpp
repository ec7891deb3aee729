// SPDX-License-Identifier: Apache-2.0
// Command-line front end: pretrain -> pairs -> align -> fuse -> evaluate,
// plus the exact oracle checks.
#include <chrono>
#include <cmath>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "msdda/alignment.hpp"
#include "msdda/csv.hpp"
#include "msdda/errors.hpp"
#include "msdda/fusion_sampler.hpp"
#include "msdda/harness.hpp"
#include "msdda/oracle.hpp"

namespace fs = std::filesystem;
using namespace msdda;

namespace {

constexpr int kExitAssert = 4;

struct Globals {
  std::string config;
  std::uint64_t seed = 0;
  CLI::Option* seed_opt = nullptr;
  std::string out = "out";
  int threads = 1;

  std::optional<std::uint64_t> seed_override() const {
    return seed_opt && seed_opt->count() ? std::optional<std::uint64_t>(seed) : std::nullopt;
  }
};

ExperimentConfig config_of(const Globals& g) {
  if (g.config.empty()) {
    if (!g.seed_override()) return default_config();
    // Re-derive every stage seed from the new master seed.
    auto text = nlohmann::json::parse(config_to_json(default_config()));
    for (const char* key : {"dataset", "pretrain", "sweep"}) text[key].erase("seed");
    for (auto& o : text["objectives"]) {
      o["pairs"].erase("seed");
      o["dpo"].erase("seed");
    }
    return parse_config(text.dump(), g.seed_override());
  }
  return load_config(g.config, g.seed_override());
}

fs::path out_dir(const Globals& g) {
  fs::create_directories(g.out);
  return g.out;
}

void log_line(const std::string& s) { std::cerr << s << '\n'; }

const ObjectiveConfig& objective_of(const ExperimentConfig& c, const std::string& name) {
  for (const auto& o : c.objectives)
    if (o.name == name) return o;
  throw ParameterError("--objective: no objective named '" + name + "' in config");
}

std::string default_path(const Globals& g, const std::string& given, const std::string& file) {
  return given.empty() ? (fs::path(g.out) / file).string() : given;
}

struct OracleFamily {
  int S = 41;
  double L = 3.0;
  int T = 4;
  int M = 2;
  double lambda = 0.1;
  int instances = 50;
  std::uint64_t first_seed = 0;
  bool assert_mode = false;

  void add_options(CLI::App* app) {
    app->add_option("--S", S, "grid size")->check(CLI::PositiveNumber);
    app->add_option("--L", L, "grid half-width")->check(CLI::PositiveNumber);
    app->add_option("--T", T, "horizon")->check(CLI::PositiveNumber);
    app->add_option("--M", M, "number of rewards")->check(CLI::PositiveNumber);
    app->add_option("--lambda", lambda, "KL strength")->check(CLI::PositiveNumber);
    app->add_option("--instances", instances, "random instances")->check(CLI::PositiveNumber);
    app->add_option("--first-seed", first_seed, "seed of the first instance");
    app->add_flag("--assert", assert_mode, "exit 4 if a check exceeds its tolerance");
  }
  InstanceSpec spec(std::uint64_t seed) const { return {S, L, T, M, lambda, seed}; }
};

int finish(bool ok, bool assert_mode) {
  std::cout << (ok ? "PASS" : "FAIL") << '\n';
  return ok || !assert_mode ? 0 : kExitAssert;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"MSDDA lab: step-level DPO alignment, denoising-time fusion and exact oracles"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "experiment config (JSON)");
  g.seed_opt = app.add_option("--seed", g.seed, "master seed (overrides the config)");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--threads", g.threads, "worker threads")->check(CLI::PositiveNumber);
  app.fallthrough();

  int rc = 0;

  // pretrain
  auto* pretrain_cmd = app.add_subcommand("pretrain", "train the base model (cached in --out)");
  bool force = false;
  pretrain_cmd->add_flag("--force", force, "ignore a cached checkpoint");
  pretrain_cmd->callback([&] {
    const auto c = config_of(g);
    const auto dir = out_dir(g);
    if (force) fs::remove(dir / "pretrained.json");
    bool cached = false;
    pretrained_model(c, dir, &cached, log_line);
    std::cout << (dir / "pretrained.json").string() << (cached ? " (cached)" : "") << '\n';
  });

  // pairs
  std::string objective, model_path, pairs_path, output;
  auto* pairs_cmd = app.add_subcommand("pairs", "sample preference pairs for one objective");
  pairs_cmd->add_option("--objective", objective, "objective name")->required();
  pairs_cmd->add_option("--model", model_path, "reference checkpoint (default OUT/pretrained.json)");
  pairs_cmd->callback([&] {
    const auto c = config_of(g);
    const auto& o = objective_of(c, objective);
    const auto pre = load_model(default_path(g, model_path, "pretrained.json"));
    const auto pairs = make_pairs(pre, o.reward, o.n_pairs, o.pairs_seed, g.threads);
    const auto path = out_dir(g) / ("pairs_" + o.name + ".csv");
    write_pairs_csv(path, pairs);
    std::cout << path.string() << '\n';
  });

  // align
  auto* align_cmd = app.add_subcommand("align", "step-level DPO fine-tuning for one objective");
  align_cmd->add_option("--objective", objective, "objective name")->required();
  align_cmd->add_option("--model", model_path, "reference checkpoint (default OUT/pretrained.json)");
  align_cmd->add_option("--pairs", pairs_path, "pairs CSV (default OUT/pairs_<objective>.csv)");
  align_cmd->callback([&] {
    const auto c = config_of(g);
    const auto& o = objective_of(c, objective);
    const auto pre = load_model(default_path(g, model_path, "pretrained.json"));
    const auto pairs =
        read_pairs_csv(default_path(g, pairs_path, "pairs_" + o.name + ".csv"), pre.data_dim());
    const auto m = finetune_dpo(
        pre, pairs, o.dpo, o.eta,
        [&](int step, double loss) {
          log_line("align " + o.name + ": step " + std::to_string(step) + " loss " + format_double(loss));
        },
        std::max(1, o.dpo.steps / 10));
    const auto path = out_dir(g) / ("aligned_" + o.name + ".json");
    save_model(path, m, {{"stage", "align"}, {"objective", o.name}});
    std::cout << path.string() << '\n';
  });

  // sample
  int n = 2048, stride = 1;
  auto* sample_cmd = app.add_subcommand("sample", "ancestral samples from one checkpoint");
  sample_cmd->add_option("--model", model_path, "checkpoint")->required();
  sample_cmd->add_option("--n", n, "sample count")->check(CLI::PositiveNumber);
  sample_cmd->add_option("--stride", stride, "timestep stride")->check(CLI::PositiveNumber);
  sample_cmd->add_option("--output", output, "CSV path (default OUT/samples.csv)");
  sample_cmd->callback([&] {
    const auto c = config_of(g);
    const auto m = load_model(model_path);
    const auto x = sample(m, n, c.sweep.seed, g.threads, stride);
    const auto path = default_path(g, output, "samples.csv");
    out_dir(g);
    write_points_csv(path, x);
    std::cout << path << '\n';
  });

  // msdda
  std::vector<std::string> models;
  std::vector<double> weights;
  auto* msdda_cmd = app.add_subcommand("msdda", "fused sampling from several aligned checkpoints");
  msdda_cmd->add_option("--model", models, "checkpoint (repeat per model)")->required();
  msdda_cmd->add_option("--weights", weights, "preference weights, one per model")->required()->delimiter(',');
  msdda_cmd->add_option("--n", n, "sample count")->check(CLI::PositiveNumber);
  msdda_cmd->add_option("--stride", stride, "timestep stride")->check(CLI::PositiveNumber);
  msdda_cmd->add_option("--output", output, "CSV path (default OUT/msdda_samples.csv)");
  msdda_cmd->callback([&] {
    const auto c = config_of(g);
    std::vector<EpsilonModel> ms;
    for (const auto& p : models) ms.push_back(load_model(p));
    const FusionEnsemble ensemble(std::move(ms), PreferenceWeights(weights));
    const auto x = msdda_sample(ensemble, n, c.sweep.seed, g.threads, stride);
    const auto path = default_path(g, output, "msdda_samples.csv");
    out_dir(g);
    write_points_csv(path, x);
    std::cout << path << '\n';
  });

  // soup
  std::string model_a, model_b, pre_path;
  double w = 0.5;
  auto* soup_cmd = app.add_subcommand("soup", "sampling from the parameter-interpolated model");
  soup_cmd->add_option("--model-a", model_a, "checkpoint weighted by w")->required();
  soup_cmd->add_option("--model-b", model_b, "checkpoint weighted by 1 - w")->required();
  soup_cmd->add_option("--w", w, "interpolation weight")->check(CLI::Range(0.0, 1.0));
  soup_cmd->add_option("--n", n, "sample count")->check(CLI::PositiveNumber);
  soup_cmd->add_option("--stride", stride, "timestep stride")->check(CLI::PositiveNumber);
  soup_cmd->add_option("--output", output, "CSV path (default OUT/soup_samples.csv)");
  soup_cmd->callback([&] {
    const auto c = config_of(g);
    const auto soup = reward_soup(load_model(model_a), load_model(model_b), w);
    const auto x = sample(soup, n, c.sweep.seed, g.threads, stride);
    const auto path = default_path(g, output, "soup_samples.csv");
    out_dir(g);
    write_points_csv(path, x);
    std::cout << path << '\n';
  });

  // pareto
  auto* pareto_cmd = app.add_subcommand("pareto", "sweep msdda and soup over the config weights");
  pareto_cmd->add_option("--pretrained", pre_path, "default OUT/pretrained.json");
  pareto_cmd->add_option("--model-a", model_a, "default OUT/aligned_<objective 1>.json");
  pareto_cmd->add_option("--model-b", model_b, "default OUT/aligned_<objective 2>.json");
  pareto_cmd->callback([&] {
    const auto c = config_of(g);
    const auto dir = out_dir(g);
    const auto& o1 = c.objectives[0];
    const auto& o2 = c.objectives[1];
    const auto pre = load_model(default_path(g, pre_path, "pretrained.json"));
    const auto a = load_model(default_path(g, model_a, "aligned_" + o1.name + ".json"));
    const auto b = load_model(default_path(g, model_b, "aligned_" + o2.name + ".json"));
    SweepOptions opts = c.sweep;
    opts.threads = g.threads;
    const auto points = sweep_samples(pre, a, b, opts);
    write_text_file(dir / "sweep.csv", format_sweep_csv(summarize_sweep(points, o1.reward, o2.reward)));
    write_text_file(dir / "eval.csv",
                    format_eval_csv(evaluate_sweep(points, o1.reward, o2.reward, c.sweep.weights)));
    std::cout << (dir / "sweep.csv").string() << '\n';
  });

  // eval
  std::string samples_path;
  auto* eval_cmd = app.add_subcommand("eval", "reward statistics of a sample CSV");
  eval_cmd->add_option("--samples", samples_path, "CSV with one point per row")->required();
  eval_cmd->add_option("--weights", weights, "w values for r^w = w r1 + (1 - w) r2")->delimiter(',');
  eval_cmd->callback([&] {
    const auto c = config_of(g);
    const auto x = read_points_csv(samples_path);
    std::vector<PreferenceWeights> ws;
    for (double v : weights) ws.push_back(PreferenceWeights::pair(v));
    const auto report = evaluate(x, {c.objectives[0].reward, c.objectives[1].reward}, ws);
    std::vector<EvalRecord> records;
    for (const auto& row : report.rows) records.push_back({"samples", std::nullopt, row});
    std::cout << format_eval_csv(records);
  });

  // oracle
  auto* oracle_cmd = app.add_subcommand("oracle", "exact checks on discretized MDPs");
  oracle_cmd->require_subcommand(1);
  OracleFamily fam;

  auto* thm_cmd = oracle_cmd->add_subcommand("verify-theorem1", "fused vs directly optimal policies");
  fam.add_options(thm_cmd);
  double tol = 1e-10;
  thm_cmd->add_option("--tol", tol, "max total-variation tolerance");
  thm_cmd->callback([&] {
    const auto start = std::chrono::steady_clock::now();
    double worst = 0.0;
    for (int i = 0; i < fam.instances; ++i) {
      const std::uint64_t seed = fam.first_seed + static_cast<std::uint64_t>(i);
      const auto mdp = random_instance(fam.spec(seed));
      const auto r = verify_theorem1(mdp, random_simplex_weights(fam.M, seed), seed);
      nlohmann::json j = {{"max_tv", r.max_tv}, {"argmax_t", r.argmax_t}, {"argmax_s", r.argmax_s},
                          {"S", r.S},           {"T", r.T},               {"M", r.M},
                          {"lambda", r.lambda}, {"seed", r.seed}};
      std::cout << j.dump() << '\n';
      worst = std::max(worst, r.max_tv);
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << "max_tv " << format_double(worst) << " over " << fam.instances << " instances in "
              << secs << " s\n";
    rc = finish(worst <= tol, fam.assert_mode);
  });

  auto* add_cmd = oracle_cmd->add_subcommand("additivity", "Q of r^w vs weighted sum of Qs");
  fam.add_options(add_cmd);
  double add_tol = 1e-12;
  add_cmd->add_option("--tol", add_tol, "max abs tolerance");
  add_cmd->callback([&] {
    double worst = 0.0;
    for (int i = 0; i < fam.instances; ++i) {
      const std::uint64_t seed = fam.first_seed + static_cast<std::uint64_t>(i);
      worst = std::max(worst, q_additivity_check(random_instance(fam.spec(seed)),
                                                 random_simplex_weights(fam.M, seed)));
    }
    std::cout << "max_abs_error " << format_double(worst) << '\n';
    rc = finish(worst <= add_tol, fam.assert_mode);
  });

  auto* dec_cmd = oracle_cmd->add_subcommand("decomposition", "reward = V(s0) + sum of advantages");
  fam.add_options(dec_cmd);
  int trajectories = 10000;
  double dec_tol = 1e-10;
  dec_cmd->add_option("--trajectories", trajectories, "rollouts per instance")->check(CLI::PositiveNumber);
  dec_cmd->add_option("--tol", dec_tol, "max abs tolerance");
  dec_cmd->callback([&] {
    double worst = 0.0;
    for (int i = 0; i < fam.instances; ++i) {
      const std::uint64_t seed = fam.first_seed + static_cast<std::uint64_t>(i);
      const auto mdp = random_instance(fam.spec(seed));
      for (const auto& r : mdp.rewards)
        worst = std::max(worst, reward_decomposition_check(mdp, r, trajectories, seed));
    }
    std::cout << "max_abs_error " << format_double(worst) << '\n';
    rc = finish(worst <= dec_tol, fam.assert_mode);
  });

  auto* ana_cmd = oracle_cmd->add_subcommand("analytic", "tilted Gaussian closed form vs quadrature");
  int ana_instances = 100;
  bool ana_assert = false;
  double ana_tol = 1e-5;
  ana_cmd->add_option("--instances", ana_instances, "random cases")->check(CLI::PositiveNumber);
  ana_cmd->add_option("--first-seed", fam.first_seed, "seed of the case stream");
  ana_cmd->add_option("--tol", ana_tol, "relative tolerance");
  ana_cmd->add_flag("--assert", ana_assert, "exit 4 on failure");
  ana_cmd->callback([&] {
    const auto c = config_of(g);
    const NoiseSchedule schedule(c.schedule);
    double worst = 0.0;
    for (int i = 0; i < ana_instances; ++i) {
      const auto tc = random_tilted_case(schedule, fam.first_seed, static_cast<std::uint64_t>(i));
      const auto a = analytic_tilted_posterior(schedule, tc);
      const auto q = quadrature_tilted_posterior(schedule, tc);
      const double scale = std::max(std::abs(q.mean[0]), std::sqrt(q.variance));
      worst = std::max({worst, std::abs(a.mean[0] - q.mean[0]) / scale,
                        std::abs(a.variance - q.variance) / q.variance});
    }
    std::cout << "max_rel_error " << format_double(worst) << '\n';
    rc = finish(worst <= ana_tol, ana_assert);
  });

  // gradcheck
  int coords = 100;
  bool grad_assert = false;
  auto* grad_cmd = app.add_subcommand("gradcheck", "step-level DPO loss and gradient at theta = pre");
  grad_cmd->add_option("--model", model_path, "reference checkpoint (default: random network)");
  grad_cmd->add_option("--coords", coords, "random coordinates")->check(CLI::PositiveNumber);
  grad_cmd->add_flag("--assert", grad_assert, "exit 4 on failure");
  grad_cmd->callback([&] {
    const auto c = config_of(g);
    const NoiseSchedule schedule(c.schedule);
    MlpParams pre = model_path.empty() ? init_params(c.arch, c.pretrain.seed)
                                       : load_model(model_path).params();
    const EpsilonModel m(pre, schedule, 1.0);
    const auto pairs = make_pairs(m, c.objectives[0].reward, 32, c.objectives[0].pairs_seed);
    DpoHyper hyper = c.objectives[0].dpo;
    const auto rep = gradcheck_dpo(pre, pre, pairs, schedule, hyper, hyper.seed, coords);
    const double gap = std::abs(rep.loss - std::numbers::ln2);
    std::cout << "loss " << format_double(rep.loss) << " |loss - ln2| " << format_double(gap)
              << "\nmax_rel_error " << format_double(rep.max_rel_error) << " over " << rep.coords
              << " coordinates\n";
    rc = finish(gap <= 1e-12 && rep.max_rel_error <= 1e-4, grad_assert);
  });

  // run
  auto* run_cmd = app.add_subcommand("run", "full pipeline into --out");
  run_cmd->callback([&] {
    const auto c = config_of(g);
    const auto start = std::chrono::steady_clock::now();
    const auto result = run_experiment(c, g.out, g.threads, log_line);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << format_sweep_csv(result.sweep);
    log_line("run: finished in " + std::to_string(secs) + " s");
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return rc;
}
