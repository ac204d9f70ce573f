#pragma once

#include <array>
#include <cstdint>

namespace resonant {

// xoshiro256** seeded through splitmix64, with Box-Muller normals. The stream
// depends only on the seed, never on the platform or standard library.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 bits of mantissa.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  double normal();
  double normal(double mean, double sigma) { return mean + sigma * normal(); }
  bool bernoulli(double p) { return uniform() < p; }

  // Independent child stream seeded from this stream's next draw.
  Rng fork() { return Rng(next_u64()); }

 private:
  std::array<std::uint64_t, 4> s_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace resonant
