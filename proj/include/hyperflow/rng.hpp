#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

namespace hyperflow {

/// Seeded 64-bit Mersenne Twister with a serializable state.
///
/// Distribution objects are created per call so the engine state alone
/// determines every future draw (no cached Box-Muller spare survives a call).
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : engine_(seed) {}

  double normal();
  double uniform();  // [0, 1)
  /// +1 or -1 with equal probability.
  double rademacher();
  std::vector<double> normals(std::size_t n);
  std::size_t index(std::size_t n);  // uniform in [0, n)
  std::uint64_t next_u64() { return engine_(); }

  template <class It>
  void shuffle(It first, It last) {
    std::shuffle(first, last, engine_);
  }

  std::mt19937_64& engine() { return engine_; }

  std::vector<std::uint64_t> state() const;
  static Rng from_state(const std::vector<std::uint64_t>& words);

  friend bool operator==(const Rng& a, const Rng& b) {
    return a.engine_ == b.engine_;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace hyperflow
