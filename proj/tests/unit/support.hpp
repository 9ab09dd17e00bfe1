#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "hyperflow/point_cloud.hpp"
#include "hyperflow/tensor.hpp"
#include "oracles.hpp"

namespace support {

using Json = nlohmann::ordered_json;

/// Fixture record by name ("module.case"), loaded from fixtures/<module>.json.
const Json& fixture(const std::string& name);
std::filesystem::path fixture_dir();

std::vector<double> doubles(const Json& j);
hyperflow::PointCloud cloud(const Json& j);
std::vector<hyperflow::PointCloud> cloud_set(const Json& j);
oracle::Cloud oracle_cloud(const hyperflow::PointCloud& c);
std::vector<oracle::Cloud> oracle_set(const std::vector<hyperflow::PointCloud>& s);
/// Row vector [1, n].
hyperflow::Tensor row(const std::vector<double>& v);

/// max_i |a_i - b_i| / max(max_i |b_i|, floor).
double rel_error(const std::vector<double>& a, const std::vector<double>& b, double floor = 1e-8);

/// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& tag);

struct RunResult {
  int exit_code = 0;
  std::string output;
};
/// Runs the hyperflow executable with the given argument string.
RunResult run_cli(const std::string& args);

std::string read_file(const std::filesystem::path& p);

}  // namespace support
