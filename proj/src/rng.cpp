#include "hyperflow/rng.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

namespace hyperflow {

double Rng::normal() {
  std::normal_distribution<double> dist(0.0, 1.0);
  return dist(engine_);
}

double Rng::uniform() {
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  return dist(engine_);
}

double Rng::rademacher() { return (engine_() & 1u) ? 1.0 : -1.0; }

std::vector<double> Rng::normals(std::size_t n) {
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<double> out(n);
  for (double& v : out) v = dist(engine_);
  return out;
}

std::size_t Rng::index(std::size_t n) {
  std::uniform_int_distribution<std::size_t> dist(0, n - 1);
  return dist(engine_);
}

std::vector<std::uint64_t> Rng::state() const {
  std::ostringstream out;
  out << engine_;
  std::istringstream in(out.str());
  std::vector<std::uint64_t> words;
  std::uint64_t w = 0;
  while (in >> w) words.push_back(w);
  return words;
}

Rng Rng::from_state(const std::vector<std::uint64_t>& words) {
  std::ostringstream text;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) text << ' ';
    text << words[i];
  }
  Rng rng;
  std::istringstream in(text.str());
  in >> rng.engine_;
  if (in.fail()) throw std::invalid_argument("malformed RNG state");
  return rng;
}

}  // namespace hyperflow
