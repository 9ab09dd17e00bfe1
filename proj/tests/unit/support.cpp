#include "support.hpp"

#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <unistd.h>

namespace support {

std::filesystem::path fixture_dir() { return FIXTURE_DIR; }

const Json& fixture(const std::string& name) {
  static std::map<std::string, Json> docs;
  const std::string module = name.substr(0, name.find('.'));
  auto it = docs.find(module);
  if (it == docs.end()) {
    std::ifstream in(fixture_dir() / (module + ".json"));
    if (!in) throw std::runtime_error("no fixture file for " + module);
    it = docs.emplace(module, Json::parse(in)).first;
  }
  for (const Json& f : it->second["fixtures"])
    if (f["name"] == name) return f;
  throw std::runtime_error("no fixture named " + name);
}

std::vector<double> doubles(const Json& j) { return j.get<std::vector<double>>(); }

hyperflow::PointCloud cloud(const Json& j) {
  hyperflow::PointCloud c;
  for (const Json& p : j) c.points.push_back({p[0].get<double>(), p[1].get<double>(), p[2].get<double>()});
  return c;
}

std::vector<hyperflow::PointCloud> cloud_set(const Json& j) {
  std::vector<hyperflow::PointCloud> s;
  for (const Json& c : j) s.push_back(cloud(c));
  return s;
}

oracle::Cloud oracle_cloud(const hyperflow::PointCloud& c) {
  return oracle::Cloud(c.points.begin(), c.points.end());
}

std::vector<oracle::Cloud> oracle_set(const std::vector<hyperflow::PointCloud>& s) {
  std::vector<oracle::Cloud> out;
  for (const auto& c : s) out.push_back(oracle_cloud(c));
  return out;
}

hyperflow::Tensor row(const std::vector<double>& v) { return hyperflow::Tensor::matrix(1, v.size(), v); }

double rel_error(const std::vector<double>& a, const std::vector<double>& b, double floor) {
  double scale = floor, err = 0;
  for (double x : b) scale = std::max(scale, std::abs(x));
  for (std::size_t i = 0; i < a.size(); ++i) err = std::max(err, std::abs(a[i] - b[i]));
  return err / scale;
}

std::filesystem::path scratch_dir(const std::string& tag) {
  auto p = std::filesystem::temp_directory_path() /
           ("hyperflow_" + tag + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

RunResult run_cli(const std::string& args) {
  const std::string cmd = std::string(HYPERFLOW_CLI) + " " + args + " 2>&1";
  RunResult r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) throw std::runtime_error("popen failed");
  std::array<char, 4096> buf;
  while (std::fgets(buf.data(), buf.size(), pipe)) r.output += buf.data();
  const int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace support
