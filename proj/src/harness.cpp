// SPDX-License-Identifier: Apache-2.0
#include "msdda/harness.hpp"

#include <cinttypes>
#include <cstdio>
#include <set>
#include <sstream>

#include <json.hpp>

#include "msdda/checkpoint.hpp"
#include "msdda/csv.hpp"
#include "msdda/errors.hpp"

namespace msdda {

using nlohmann::json;

// ---------------------------------------------------------------- evaluation

namespace {

std::string join_weights(const std::vector<double>& w) {
  std::string out;
  for (std::size_t i = 0; i < w.size(); ++i) {
    if (i) out += ';';
    out += format_double(w[i]);
  }
  return out;
}

std::vector<double> split_weights(const std::string& text) {
  std::vector<double> out;
  if (text.empty()) return out;
  std::size_t start = 0;
  while (true) {
    const std::size_t end = text.find(';', start);
    out.push_back(parse_double(text.substr(start, end - start)));
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return out;
}

}  // namespace

EvalReport evaluate(const Eigen::MatrixXd& batch, const std::vector<RewardFn>& rewards,
                    const std::vector<PreferenceWeights>& weights) {
  if (batch.cols() == 0) throw ParameterError("evaluate: empty batch");
  EvalReport report;
  std::vector<Eigen::VectorXd> values;
  for (std::size_t i = 0; i < rewards.size(); ++i) {
    values.push_back(rewards[i].evaluate(batch));
    const MeanSe s = mean_se(values.back());
    report.rows.push_back({"r" + std::to_string(i + 1), {}, s.mean, s.se, s.n});
  }
  for (const auto& w : weights) {
    if (w.size() != rewards.size())
      throw ParameterError("evaluate: weight vector length does not match reward count");
    Eigen::VectorXd rw = Eigen::VectorXd::Zero(batch.cols());
    for (std::size_t i = 0; i < rewards.size(); ++i) rw += w[i] * values[i];
    const MeanSe s = mean_se(rw);
    report.rows.push_back(
        {"rw", std::vector<double>(w.values().begin(), w.values().end()), s.mean, s.se, s.n});
  }
  return report;
}

std::string format_eval_csv(const std::vector<EvalRecord>& records) {
  std::ostringstream out;
  out << kEvalCsvHeader << '\n';
  for (const auto& r : records) {
    out << r.method << ',' << (r.w ? format_double(*r.w) : std::string()) << ',' << r.row.quantity
        << ',' << join_weights(r.row.weights) << ',' << format_double(r.row.mean) << ','
        << format_double(r.row.se) << ',' << r.row.n << '\n';
  }
  return out.str();
}

std::vector<EvalRecord> parse_eval_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kEvalCsvHeader)
    throw ParameterError("eval csv: missing or unexpected header");
  std::vector<EvalRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 7)
      throw ParameterError("eval csv: line " + std::to_string(lineno) + " has " +
                           std::to_string(f.size()) + " fields, expected 7");
    EvalRecord r;
    r.method = f[0];
    if (!f[1].empty()) r.w = parse_double(f[1]);
    r.row.quantity = f[2];
    r.row.weights = split_weights(f[3]);
    r.row.mean = parse_double(f[4]);
    r.row.se = parse_double(f[5]);
    r.row.n = static_cast<std::size_t>(std::stoull(f[6]));
    out.push_back(std::move(r));
  }
  return out;
}

std::vector<EvalRecord> evaluate_sweep(const std::vector<SweepPoint>& points, const RewardFn& r1,
                                       const RewardFn& r2, const std::vector<double>& weights) {
  std::vector<EvalRecord> out;
  for (const auto& p : points) {
    std::vector<PreferenceWeights> ws;
    if (p.w)
      ws.push_back(PreferenceWeights::pair(*p.w));
    else
      for (double w : weights) ws.push_back(PreferenceWeights::pair(w));
    for (auto& row : evaluate(p.samples, {r1, r2}, ws).rows)
      out.push_back({p.method, p.w, std::move(row)});
  }
  return out;
}

// ------------------------------------------------------------- configuration

std::uint64_t derive_seed(std::uint64_t master, std::string_view label) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char ch : label) {
    h ^= ch;
    h *= 0x100000001b3ull;
  }
  std::uint64_t z = master ^ h;
  z += 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  return z ^ (z >> 31);
}

namespace {

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw ParameterError(where + ": expected an object");
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) throw ParameterError(where + ": unknown key '" + key + "'");
}

template <typename T>
T get_or(const json& j, const char* key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParameterError(where + "." + key + ": " + e.what());
  }
}

Eigen::VectorXd vector_of(const json& j, const std::string& where) {
  if (!j.is_array()) throw ParameterError(where + ": expected an array");
  try {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  } catch (const json::exception& e) {
    throw ParameterError(where + ": " + e.what());
  }
}

json vector_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

RewardFn reward_from_json(const json& j, const std::string& where) {
  const std::string kind = get_or<std::string>(j, "kind", "", where);
  if (kind == "axis") {
    check_keys(j, {"kind", "axis", "c"}, where);
    return RewardFn::axis(get_or<int>(j, "axis", 0, where), get_or<double>(j, "c", 1.0, where));
  }
  if (kind == "linear") {
    check_keys(j, {"kind", "c"}, where);
    if (!j.contains("c")) throw ParameterError(where + ".c: missing");
    return RewardFn::linear(vector_of(j["c"], where + ".c"));
  }
  if (kind == "radial") {
    check_keys(j, {"kind", "target"}, where);
    if (!j.contains("target")) throw ParameterError(where + ".target: missing");
    return RewardFn::radial(vector_of(j["target"], where + ".target"));
  }
  if (kind == "halfspace") {
    check_keys(j, {"kind", "c", "b", "k"}, where);
    if (!j.contains("c")) throw ParameterError(where + ".c: missing");
    return RewardFn::halfspace(vector_of(j["c"], where + ".c"), get_or<double>(j, "b", 0.0, where),
                               get_or<double>(j, "k", 1.0, where));
  }
  throw ParameterError(where + ".kind: unknown reward kind '" + kind + "'");
}

json reward_to_json(const RewardFn& r) {
  return std::visit(
      [](const auto& k) -> json {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, reward::Axis>)
          return {{"kind", "axis"}, {"axis", k.axis}, {"c", k.c}};
        else if constexpr (std::is_same_v<K, reward::Linear>)
          return {{"kind", "linear"}, {"c", vector_json(k.c)}};
        else if constexpr (std::is_same_v<K, reward::Radial>)
          return {{"kind", "radial"}, {"target", vector_json(k.target)}};
        else if constexpr (std::is_same_v<K, reward::Halfspace>)
          return {{"kind", "halfspace"}, {"c", vector_json(k.c)}, {"b", k.b}, {"k", k.k}};
        else
          throw ParameterError("config: weighted rewards cannot be serialized");
      },
      r.kind());
}

std::uint64_t seed_or(const json& j, const std::string& where, std::uint64_t master,
                      std::string_view label) {
  if (!j.contains("seed")) return derive_seed(master, label);
  return get_or<std::uint64_t>(j, "seed", 0, where);
}

}  // namespace

RewardFn parse_reward_json(const std::string& text) {
  try {
    return reward_from_json(json::parse(text), "reward");
  } catch (const json::parse_error& e) {
    throw ParameterError(std::string("reward: ") + e.what());
  }
}

ExperimentConfig default_config() {
  ExperimentConfig c;
  c.seed = 0;
  c.dataset.seed = derive_seed(c.seed, "dataset");
  c.pretrain.seed = derive_seed(c.seed, "pretrain");
  const auto objective = [&](const std::string& name, int axis, double eta) {
    ObjectiveConfig o;
    o.name = name;
    o.reward = RewardFn::axis(axis);
    o.eta = eta;
    o.pairs_seed = derive_seed(c.seed, "pairs/" + name);
    o.dpo.lambda = 0.01;
    o.dpo.lr = 1e-3;
    o.dpo.steps = 2000;
    o.dpo.batch = 256;
    o.dpo.seed = derive_seed(c.seed, "dpo/" + name);
    return o;
  };
  c.objectives = {objective("r1", 0, 1.0), objective("r2", 1, 0.8)};
  for (int i = 0; i <= 10; ++i) c.sweep.weights.push_back(i / 10.0);
  c.sweep.seed = derive_seed(c.seed, "sweep");
  return c;
}

ExperimentConfig parse_config(const std::string& text, std::optional<std::uint64_t> seed_override) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParameterError(std::string("config: ") + e.what());
  }
  check_keys(j, {"seed", "dataset", "schedule", "arch", "pretrain", "objectives", "sweep"}, "config");
  ExperimentConfig c;
  c.seed = seed_override ? *seed_override : get_or<std::uint64_t>(j, "seed", 0, "config");
  const json empty = json::object();
  const auto section = [&](const char* key) -> const json& { return j.contains(key) ? j[key] : empty; };

  {
    const json& d = section("dataset");
    check_keys(d, {"kind", "n", "seed", "scale", "path"}, "dataset");
    c.dataset.kind = parse_dataset_kind(get_or<std::string>(d, "kind", "ring8", "dataset"));
    c.dataset.n = get_or<int>(d, "n", c.dataset.n, "dataset");
    c.dataset.scale = get_or<double>(d, "scale", c.dataset.scale, "dataset");
    c.dataset.path = get_or<std::string>(d, "path", "", "dataset");
    c.dataset.seed = seed_or(d, "dataset", c.seed, "dataset");
  }
  {
    const json& s = section("schedule");
    check_keys(s, {"kind", "T", "beta_start", "beta_end"}, "schedule");
    c.schedule.kind = parse_schedule_kind(get_or<std::string>(s, "kind", "linear", "schedule"));
    c.schedule.T = get_or<int>(s, "T", c.schedule.T, "schedule");
    c.schedule.beta_start = get_or<double>(s, "beta_start", c.schedule.beta_start, "schedule");
    c.schedule.beta_end = get_or<double>(s, "beta_end", c.schedule.beta_end, "schedule");
  }
  {
    const json& a = section("arch");
    check_keys(a, {"t_embed_dim", "hidden", "activation"}, "arch");
    c.arch.t_embed_dim = get_or<int>(a, "t_embed_dim", c.arch.t_embed_dim, "arch");
    c.arch.hidden = get_or<std::vector<int>>(a, "hidden", c.arch.hidden, "arch");
    c.arch.activation = parse_activation(get_or<std::string>(a, "activation", "silu", "arch"));
  }
  {
    const json& p = section("pretrain");
    check_keys(p, {"steps", "lr", "batch", "seed"}, "pretrain");
    c.pretrain.steps = get_or<int>(p, "steps", c.pretrain.steps, "pretrain");
    c.pretrain.lr = get_or<double>(p, "lr", c.pretrain.lr, "pretrain");
    c.pretrain.batch = get_or<int>(p, "batch", c.pretrain.batch, "pretrain");
    c.pretrain.seed = seed_or(p, "pretrain", c.seed, "pretrain");
  }
  if (j.contains("objectives")) {
    if (!j["objectives"].is_array()) throw ParameterError("objectives: expected an array");
    std::size_t idx = 0;
    for (const auto& o : j["objectives"]) {
      const std::string where = "objectives[" + std::to_string(idx++) + "]";
      check_keys(o, {"name", "reward", "eta", "pairs", "dpo"}, where);
      ObjectiveConfig oc;
      oc.name = get_or<std::string>(o, "name", "r" + std::to_string(idx), where);
      if (!o.contains("reward")) throw ParameterError(where + ".reward: missing");
      oc.reward = reward_from_json(o["reward"], where + ".reward");
      oc.eta = get_or<double>(o, "eta", 1.0, where);
      const json& pr = o.contains("pairs") ? o["pairs"] : empty;
      check_keys(pr, {"n", "seed"}, where + ".pairs");
      oc.n_pairs = get_or<int>(pr, "n", oc.n_pairs, where + ".pairs");
      oc.pairs_seed = seed_or(pr, where + ".pairs", c.seed, "pairs/" + oc.name);
      const json& dp = o.contains("dpo") ? o["dpo"] : empty;
      const std::string dw = where + ".dpo";
      check_keys(dp, {"lambda", "omega", "T_train", "lr", "steps", "batch", "seed"}, dw);
      oc.dpo.lambda = get_or<double>(dp, "lambda", oc.dpo.lambda, dw);
      oc.dpo.omega = get_or<double>(dp, "omega", oc.dpo.omega, dw);
      oc.dpo.T_train = get_or<int>(dp, "T_train", oc.dpo.T_train, dw);
      oc.dpo.lr = get_or<double>(dp, "lr", oc.dpo.lr, dw);
      oc.dpo.steps = get_or<int>(dp, "steps", oc.dpo.steps, dw);
      oc.dpo.batch = get_or<int>(dp, "batch", oc.dpo.batch, dw);
      oc.dpo.seed = seed_or(dp, dw, c.seed, "dpo/" + oc.name);
      c.objectives.push_back(std::move(oc));
    }
  }
  {
    const json& s = section("sweep");
    check_keys(s, {"weights", "n", "stride", "seed"}, "sweep");
    c.sweep.weights = get_or<std::vector<double>>(s, "weights", {}, "sweep");
    c.sweep.n = get_or<int>(s, "n", c.sweep.n, "sweep");
    c.sweep.stride = get_or<int>(s, "stride", c.sweep.stride, "sweep");
    c.sweep.seed = seed_or(s, "sweep", c.seed, "sweep");
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path,
                             std::optional<std::uint64_t> seed_override) {
  return parse_config(read_text_file(path), seed_override);
}

void ExperimentConfig::validate() const {
  if (dataset.n < 1 && dataset.kind != DatasetKind::kCustomFile)
    throw ParameterError("dataset.n: must be >= 1");
  if (!(dataset.scale > 0.0)) throw ParameterError("dataset.scale: must be > 0");
  if (dataset.kind == DatasetKind::kCustomFile && dataset.path.empty())
    throw ParameterError("dataset.path: required for custom-file");
  NoiseSchedule check(schedule);
  arch.validate();
  if (pretrain.steps < 0) throw ParameterError("pretrain.steps: must be >= 0");
  if (pretrain.batch < 1) throw ParameterError("pretrain.batch: must be >= 1");
  if (!(pretrain.lr > 0.0)) throw ParameterError("pretrain.lr: must be > 0");
  if (objectives.size() != 2)
    throw ParameterError("objectives: the pipeline needs exactly 2 objectives, got " +
                         std::to_string(objectives.size()));
  std::set<std::string> names;
  for (const auto& o : objectives) {
    const std::string where = "objectives." + o.name;
    if (o.name.empty() || o.name.find_first_of("/\\,") != std::string::npos)
      throw ParameterError("objectives: invalid name '" + o.name + "'");
    if (!names.insert(o.name).second) throw ParameterError("objectives: duplicate name " + o.name);
    if (!(o.eta >= 0.0 && o.eta <= 1.0)) throw ParameterError(where + ".eta: must lie in [0, 1]");
    if (o.n_pairs < 1) throw ParameterError(where + ".pairs.n: must be >= 1");
    if (!(o.dpo.lambda > 0.0)) throw ParameterError(where + ".dpo.lambda: must be > 0");
    if (!(o.dpo.omega > 0.0)) throw ParameterError(where + ".dpo.omega: must be > 0");
    if (o.dpo.T_train < 0) throw ParameterError(where + ".dpo.T_train: must be >= 0");
    if (!(o.dpo.lr > 0.0)) throw ParameterError(where + ".dpo.lr: must be > 0");
    if (o.dpo.steps < 0) throw ParameterError(where + ".dpo.steps: must be >= 0");
    if (o.dpo.batch < 1) throw ParameterError(where + ".dpo.batch: must be >= 1");
  }
  if (sweep.weights.empty()) throw ParameterError("sweep.weights: must not be empty");
  for (double w : sweep.weights)
    if (!(w >= 0.0 && w <= 1.0)) throw ParameterError("sweep.weights: values must lie in [0, 1]");
  if (sweep.n < 1) throw ParameterError("sweep.n: must be >= 1");
  if (sweep.stride < 1) throw ParameterError("sweep.stride: must be >= 1");
}

namespace {

json config_json(const ExperimentConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["dataset"] = {{"kind", to_string(c.dataset.kind)},
                  {"n", c.dataset.n},
                  {"seed", c.dataset.seed},
                  {"scale", c.dataset.scale},
                  {"path", c.dataset.path.string()}};
  j["schedule"] = {{"kind", std::string(to_string(c.schedule.kind))},
                   {"T", c.schedule.T},
                   {"beta_start", c.schedule.beta_start},
                   {"beta_end", c.schedule.beta_end}};
  j["arch"] = {{"t_embed_dim", c.arch.t_embed_dim},
               {"hidden", c.arch.hidden},
               {"activation", std::string(to_string(c.arch.activation))}};
  j["pretrain"] = {{"steps", c.pretrain.steps},
                   {"lr", c.pretrain.lr},
                   {"batch", c.pretrain.batch},
                   {"seed", c.pretrain.seed}};
  j["objectives"] = json::array();
  for (const auto& o : c.objectives) {
    j["objectives"].push_back({{"name", o.name},
                               {"reward", reward_to_json(o.reward)},
                               {"eta", o.eta},
                               {"pairs", {{"n", o.n_pairs}, {"seed", o.pairs_seed}}},
                               {"dpo",
                                {{"lambda", o.dpo.lambda},
                                 {"omega", o.dpo.omega},
                                 {"T_train", o.dpo.T_train},
                                 {"lr", o.dpo.lr},
                                 {"steps", o.dpo.steps},
                                 {"batch", o.dpo.batch},
                                 {"seed", o.dpo.seed}}}});
  }
  j["sweep"] = {{"weights", c.sweep.weights},
                {"n", c.sweep.n},
                {"stride", c.sweep.stride},
                {"seed", c.sweep.seed}};
  return j;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

std::string pretrain_key(const ExperimentConfig& c) {
  json j = config_json(c);
  json key = {{"dataset", j["dataset"]}, {"schedule", j["schedule"]}, {"arch", j["arch"]},
              {"pretrain", j["pretrain"]}};
  return hex64(derive_seed(0, key.dump()));
}

}  // namespace

std::string config_to_json(const ExperimentConfig& config) {
  return config_json(config).dump(2) + "\n";
}

// ----------------------------------------------------------------- pipeline

EpsilonModel load_model(const std::filesystem::path& checkpoint) {
  Checkpoint ck = load_checkpoint(checkpoint);
  return EpsilonModel(std::move(ck.params), NoiseSchedule(ck.schedule), ck.eta);
}

void save_model(const std::filesystem::path& checkpoint, const EpsilonModel& model,
                const std::map<std::string, std::string>& meta) {
  save_checkpoint(checkpoint, model.params(), model.schedule().spec(), model.eta(), meta);
}

EpsilonModel pretrained_model(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                              bool* cached, const LogFn& log) {
  const auto path = out_dir / "pretrained.json";
  const std::string key = pretrain_key(config);
  if (cached) *cached = false;
  if (std::filesystem::exists(path)) {
    const Checkpoint ck = load_checkpoint(path);
    const auto it = ck.meta.find("config_key");
    if (it != ck.meta.end() && it->second == key) {
      if (log) log("pretrain: using cached checkpoint " + path.string());
      if (cached) *cached = true;
      return EpsilonModel(ck.params, NoiseSchedule(ck.schedule), ck.eta);
    }
    if (log) log("pretrain: cached checkpoint does not match config, retraining");
  }
  const Dataset2D data = make_dataset(config.dataset);
  MlpArchitecture arch = config.arch;
  arch.data_dim = static_cast<int>(data.points.rows());
  TrainOptions opts = config.pretrain;
  if (log) {
    opts.log_every = std::max(1, opts.steps / 10);
    opts.on_log = [&](int step, double loss) {
      log("pretrain: step " + std::to_string(step) + " loss " + format_double(loss));
    };
  }
  EpsilonModel model = pretrain(data, arch, NoiseSchedule(config.schedule), opts);
  save_model(path, model, {{"stage", "pretrain"}, {"config_key", key}});
  return model;
}

namespace {

template <typename F>
auto stage(const std::string& name, const std::filesystem::path& out_dir, F&& body) {
  try {
    return body();
  } catch (const std::exception& e) {
    const int code = exit_code_for(e);
    try {
      write_text_file(out_dir / "FAILED", "stage " + name + ": " + e.what() + "\n");
    } catch (const std::exception&) {
    }
    throw StageError(name, e.what(), code);
  }
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                         int threads, const LogFn& log) {
  RunResult result;
  result.out_dir = out_dir;
  stage("config", out_dir, [&] {
    config.validate();
    std::filesystem::create_directories(out_dir);
    std::filesystem::remove(out_dir / "FAILED");
    return 0;
  });

  const EpsilonModel pre = stage("pretrain", out_dir, [&] {
    return pretrained_model(config, out_dir, &result.pretrain_cached, log);
  });

  std::vector<EpsilonModel> aligned;
  for (const auto& o : config.objectives) {
    const auto pairs = stage("pairs:" + o.name, out_dir, [&] {
      auto p = make_pairs(pre, o.reward, o.n_pairs, o.pairs_seed, threads);
      write_pairs_csv(out_dir / ("pairs_" + o.name + ".csv"), p);
      return p;
    });
    aligned.push_back(stage("align:" + o.name, out_dir, [&] {
      const auto on_log = [&](int step, double loss) {
        if (log) log("align " + o.name + ": step " + std::to_string(step) + " loss " + format_double(loss));
      };
      EpsilonModel m = finetune_dpo(pre, pairs, o.dpo, o.eta, on_log, std::max(1, o.dpo.steps / 10));
      save_model(out_dir / ("aligned_" + o.name + ".json"), m,
                 {{"stage", "align"}, {"objective", o.name}, {"reward", o.reward.describe()}});
      return m;
    }));
  }

  stage("sweep", out_dir, [&] {
    if (log) log("sweep: " + std::to_string(config.sweep.weights.size()) + " weights x " +
                 std::to_string(config.sweep.n) + " samples");
    SweepOptions opts = config.sweep;
    opts.threads = threads;
    const auto points = sweep_samples(pre, aligned[0], aligned[1], opts);
    const auto& r1 = config.objectives[0].reward;
    const auto& r2 = config.objectives[1].reward;
    result.sweep = summarize_sweep(points, r1, r2);
    result.eval = evaluate_sweep(points, r1, r2, config.sweep.weights);
    return 0;
  });

  stage("write", out_dir, [&] {
    const std::string sweep_csv = format_sweep_csv(result.sweep);
    const std::string eval_csv = format_eval_csv(result.eval);
    if (parse_sweep_csv(sweep_csv) != result.sweep || parse_eval_csv(eval_csv) != result.eval)
      throw IoError("CSV round trip changed values");
    write_text_file(out_dir / "sweep.csv", sweep_csv);
    write_text_file(out_dir / "eval.csv", eval_csv);
    json manifest;
    manifest["code_version"] = MSDDA_VERSION;
    manifest["config"] = config_json(config);
    json seeds = {{"dataset", config.dataset.seed},
                  {"pretrain", config.pretrain.seed},
                  {"sweep", config.sweep.seed}};
    for (const auto& o : config.objectives) {
      seeds["pairs/" + o.name] = o.pairs_seed;
      seeds["dpo/" + o.name] = o.dpo.seed;
    }
    manifest["seeds"] = seeds;
    json outputs = {"pretrained.json", "sweep.csv", "eval.csv"};
    for (const auto& o : config.objectives) {
      outputs.push_back("pairs_" + o.name + ".csv");
      outputs.push_back("aligned_" + o.name + ".json");
    }
    manifest["outputs"] = outputs;
    write_text_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
    return 0;
  });
  if (log) log("run: wrote " + (out_dir / "sweep.csv").string());
  return result;
}

}  // namespace msdda
