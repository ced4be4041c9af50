#pragma once

#include "gmmest/linalg.hpp"

#include <cstdint>
#include <random>

namespace gmmest {

/// Reproducible random stream.
///
/// Streams are addressed by (seed, stream index); the engine is the
/// standardized mt19937_64 seeded through std::seed_seq, and the uniform and
/// normal transforms are written out here so outputs do not depend on the
/// standard library's distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed, std::uint64_t stream = 0);

  // Independent child stream, e.g. one per sample or per sweep cell.
  Rng fork(std::uint64_t stream) const { return Rng(seed_ ^ mix(stream_ + 0x9e37u), stream); }

  std::uint64_t next_u64() { return engine_(); }
  // uniform on [0, 1)
  double uniform();
  double normal();
  // circular complex Gaussian with E|z|^2 = variance
  cplx complex_normal(double variance = 1.0);
  CVector complex_normal_vector(Eigen::Index n, double variance = 1.0);
  // index drawn with probability proportional to weights
  Eigen::Index categorical(const RVector& weights);

  static std::uint64_t mix(std::uint64_t x);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace gmmest
