// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <map>
#include <string>

#include "msdda/nn.hpp"
#include "msdda/schedule.hpp"

namespace msdda {

inline constexpr int kCheckpointFormatVersion = 1;

/// Everything a checkpoint file holds. Schedule arrays are rebuilt from the
/// spec on load.
struct Checkpoint {
  MlpParams params;
  ScheduleSpec schedule;
  double eta = 1.0;
  std::map<std::string, std::string> meta;
};

/// Writes a JSON document {format_version, arch, schedule, eta, params, meta}.
/// Each parameter is written as the shortest decimal that round-trips.
void save_checkpoint(const std::filesystem::path& path, const MlpParams& params,
                     const ScheduleSpec& schedule, double eta,
                     const std::map<std::string, std::string>& meta = {});

/// Throws IoError if the file cannot be read and ParameterError on schema
/// problems (version, unknown keys, params length).
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace msdda
