#pragma once

#include <cstdint>
#include <random>

namespace histreg {

/// Deterministic random helpers. std::mt19937_64 is bit-stable across
/// platforms but the standard distributions are not, so uniform/normal draws
/// are generated explicitly here.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t nextU64() { return engine_(); }

  /// Uniform integer in [0, n). n must be > 0.
  std::size_t uniformIndex(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }

  /// Uniform double in [0, 1).
  double uniform() { return (engine_() >> 11) * (1.0 / 9007199254740992.0); }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (two engine draws per value; no caching,
  /// so the draw count per call is fixed).
  double normal();

  double normal(double mean, double sigma) { return mean + sigma * normal(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace histreg
