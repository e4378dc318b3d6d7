#pragma once

#include <cstdint>
#include <random>

namespace betalink {

/// 64-bit Mersenne Twister with hand-written variate transforms, so streams
/// are identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Independent stream for replication `index` of a study seeded by `seed`.
  static Rng stream(std::uint64_t seed, std::uint64_t index);

  std::uint64_t next_u64() { return engine_(); }
  /// Uniform on the open interval (0, 1).
  double uniform();
  double normal();
  /// log of a Gamma(shape, 1) variate; stays finite for tiny shapes.
  double log_gamma_variate(double shape);
  /// Beta(p, q) variate built from two gamma variates.
  double beta(double p, double q);

 private:
  std::mt19937_64 engine_;
};

std::uint64_t splitmix64(std::uint64_t x);

}  // namespace betalink
