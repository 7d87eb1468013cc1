#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace atslg {

/// Seeded random stream. Every stage draws from its own named sub-stream of
/// one master seed, so stages are reproducible independently of each other.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Sub-stream `name` of `master_seed` (e.g. "initial", "eval.rep3").
  static Rng stream(std::uint64_t master_seed, std::string_view name);

  /// Uniform in [0, 1) with 53 random bits; independent of the standard
  /// library's distribution implementations.
  double uniform();
  /// Uniform integer in [0, n). n must be positive.
  std::uint64_t below(std::uint64_t n);
  /// Standard normal draw.
  double normal();

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

/// 64-bit FNV-1a hash, used for stream names and config fingerprints.
std::uint64_t fnv1a64(std::string_view bytes);

}  // namespace atslg
