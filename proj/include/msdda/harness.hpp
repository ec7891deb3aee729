// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "msdda/alignment.hpp"
#include "msdda/diffusion.hpp"
#include "msdda/fusion_sampler.hpp"
#include "msdda/nn.hpp"
#include "msdda/rewards.hpp"
#include "msdda/schedule.hpp"

namespace msdda {

// ---------------------------------------------------------------- evaluation

struct EvalRow {
  std::string quantity;          // "r1", "r2", ... or "rw"
  std::vector<double> weights;   // empty for single rewards
  double mean = 0.0;
  double se = 0.0;
  std::size_t n = 0;

  friend bool operator==(const EvalRow&, const EvalRow&) = default;
};

/// One row per reward, then one r^w row per weight vector.
struct EvalReport {
  std::vector<EvalRow> rows;
};

EvalReport evaluate(const Eigen::MatrixXd& batch, const std::vector<RewardFn>& rewards,
                    const std::vector<PreferenceWeights>& weights);

/// A report tagged with the sweep row it came from.
struct EvalRecord {
  std::string method;
  std::optional<double> w;
  EvalRow row;

  friend bool operator==(const EvalRecord&, const EvalRecord&) = default;
};

inline constexpr const char* kEvalCsvHeader = "method,w,quantity,weights,mean,se,n";
std::string format_eval_csv(const std::vector<EvalRecord>& records);
std::vector<EvalRecord> parse_eval_csv(const std::string& text);

/// Evaluates every sweep point under both rewards and r^w. Rows with a w get
/// r^w at (w, 1 - w); the pretrained row gets r^w at every `weights` entry.
std::vector<EvalRecord> evaluate_sweep(const std::vector<SweepPoint>& points, const RewardFn& r1,
                                       const RewardFn& r2, const std::vector<double>& weights);

// ------------------------------------------------------------- configuration

struct ObjectiveConfig {
  std::string name;
  RewardFn reward;
  double eta = 1.0;
  int n_pairs = 4000;
  std::uint64_t pairs_seed = 0;
  DpoHyper dpo;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  DatasetSpec dataset;
  ScheduleSpec schedule;
  MlpArchitecture arch;
  TrainOptions pretrain;
  std::vector<ObjectiveConfig> objectives;
  SweepOptions sweep;

  /// Throws ParameterError naming the offending field.
  void validate() const;
};

/// Parses the JSON config document. Seeds left out of the document are derived
/// from the top-level "seed" (or `seed_override` when given).
ExperimentConfig parse_config(const std::string& text,
                              std::optional<std::uint64_t> seed_override = std::nullopt);
ExperimentConfig load_config(const std::filesystem::path& path,
                             std::optional<std::uint64_t> seed_override = std::nullopt);
ExperimentConfig default_config();
/// Fully resolved config as JSON text (every seed explicit).
std::string config_to_json(const ExperimentConfig& config);

RewardFn parse_reward_json(const std::string& text);

/// Stage seed derived from the master seed and a stage label.
std::uint64_t derive_seed(std::uint64_t master, std::string_view label);

// ----------------------------------------------------------------- pipeline

/// A pipeline stage failed; what() is "stage <name>: <cause>".
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& cause, int exit_code)
      : std::runtime_error("stage " + stage + ": " + cause),
        stage_(std::move(stage)),
        exit_code_(exit_code) {}
  const std::string& stage() const { return stage_; }
  int exit_code() const { return exit_code_; }

 private:
  std::string stage_;
  int exit_code_;
};

struct RunResult {
  std::filesystem::path out_dir;
  std::vector<SweepRow> sweep;
  std::vector<EvalRecord> eval;
  bool pretrain_cached = false;
};

using LogFn = std::function<void(const std::string&)>;

/// pretrain (or cached checkpoint) -> pairs + DPO per objective -> sweep ->
/// sweep.csv, eval.csv, manifest.json under out_dir. On failure writes
/// out_dir/FAILED and throws StageError.
RunResult run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                         int threads = 1, const LogFn& log = {});

/// Pretrained model for a config: loads out_dir/pretrained.json when its
/// recorded config key matches, otherwise trains and writes it.
EpsilonModel pretrained_model(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                              bool* cached = nullptr, const LogFn& log = {});

EpsilonModel load_model(const std::filesystem::path& checkpoint);
void save_model(const std::filesystem::path& checkpoint, const EpsilonModel& model,
                const std::map<std::string, std::string>& meta = {});

}  // namespace msdda
