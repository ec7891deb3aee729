// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace msdda {

/// Shortest decimal text that parses back to exactly `value`.
std::string format_double(double value);
double parse_double(std::string_view text);

std::vector<std::string> split_csv_line(std::string_view line);

/// Rows of comma-separated decimals, no header. Blank lines are skipped.
std::vector<std::vector<double>> read_numeric_csv(const std::filesystem::path& path);

/// One column of `points` per output row.
void write_points_csv(const std::filesystem::path& path, const Eigen::MatrixXd& points);
Eigen::MatrixXd read_points_csv(const std::filesystem::path& path);

void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace msdda
