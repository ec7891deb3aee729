// SPDX-License-Identifier: Apache-2.0
#include "msdda/checkpoint.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "msdda/errors.hpp"

namespace msdda {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& where) {
  if (!j.is_object()) throw ParameterError(where + ": expected an object");
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key)) throw ParameterError(where + ": unknown key '" + key + "'");
  for (const auto& key : allowed)
    if (!j.contains(key)) throw ParameterError(where + ": missing key '" + key + "'");
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const MlpParams& params,
                     const ScheduleSpec& schedule, double eta,
                     const std::map<std::string, std::string>& meta) {
  if (params.flat.size() != params.arch.param_count())
    throw ParameterError("save_checkpoint: params length does not match architecture");
  if (!params.flat.allFinite()) throw NumericError("save_checkpoint: non-finite parameter");

  json doc;
  doc["format_version"] = kCheckpointFormatVersion;
  doc["arch"] = {{"in_dim", params.arch.in_dim()},
                 {"hidden", params.arch.hidden},
                 {"out_dim", params.arch.out_dim()},
                 {"t_embed_dim", params.arch.t_embed_dim},
                 {"activation", std::string(to_string(params.arch.activation))}};
  doc["schedule"] = {{"kind", std::string(to_string(schedule.kind))},
                     {"T", schedule.T},
                     {"beta_start", schedule.beta_start},
                     {"beta_end", schedule.beta_end}};
  doc["eta"] = eta;
  doc["params"] = std::vector<double>(params.flat.data(), params.flat.data() + params.flat.size());
  doc["meta"] = meta;

  std::ofstream out(path);
  if (!out) throw IoError("save_checkpoint: cannot open " + path.string());
  out << doc.dump() << '\n';
  if (!out) throw IoError("save_checkpoint: write failed for " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_checkpoint: cannot open " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParameterError("load_checkpoint: malformed document: " + std::string(e.what()));
  }

  try {
    reject_unknown_keys(doc, {"format_version", "arch", "schedule", "eta", "params", "meta"},
                        "checkpoint");
    if (doc.at("format_version").get<int>() != kCheckpointFormatVersion)
      throw ParameterError("checkpoint: format_version " + doc.at("format_version").dump() +
                           " is not supported (expected 1)");

    const json& a = doc.at("arch");
    reject_unknown_keys(a, {"in_dim", "hidden", "out_dim", "t_embed_dim", "activation"},
                        "checkpoint.arch");
    Checkpoint ck;
    ck.params.arch.data_dim = a.at("out_dim").get<int>();
    ck.params.arch.t_embed_dim = a.at("t_embed_dim").get<int>();
    ck.params.arch.hidden = a.at("hidden").get<std::vector<int>>();
    ck.params.arch.activation = parse_activation(a.at("activation").get<std::string>());
    ck.params.arch.validate();
    if (a.at("in_dim").get<int>() != ck.params.arch.in_dim())
      throw ParameterError("checkpoint.arch: in_dim must equal out_dim + t_embed_dim");

    const json& s = doc.at("schedule");
    reject_unknown_keys(s, {"kind", "T", "beta_start", "beta_end"}, "checkpoint.schedule");
    ck.schedule.kind = parse_schedule_kind(s.at("kind").get<std::string>());
    ck.schedule.T = s.at("T").get<int>();
    ck.schedule.beta_start = s.at("beta_start").get<double>();
    ck.schedule.beta_end = s.at("beta_end").get<double>();

    ck.eta = doc.at("eta").get<double>();
    const auto values = doc.at("params").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(values.size()) != ck.params.arch.param_count())
      throw ParameterError("checkpoint: params length " + std::to_string(values.size()) +
                           " does not match architecture (" +
                           std::to_string(ck.params.arch.param_count()) + ")");
    ck.params.flat = Eigen::Map<const Eigen::VectorXd>(values.data(), values.size());
    ck.meta = doc.at("meta").get<std::map<std::string, std::string>>();
    return ck;
  } catch (const json::exception& e) {
    throw ParameterError("checkpoint: " + std::string(e.what()));
  }
}

}  // namespace msdda
