#ifndef SCASEG_RNG_HPP_
#define SCASEG_RNG_HPP_

#include <cmath>
#include <cstdint>
#include <random>

namespace scaseg {

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seeded generator with explicit distributions. std::uniform_*_distribution
// is implementation-defined, so draws are spelled out here; a fixed seed
// gives the same stream on every platform.
class Rng {
 public:
  explicit Rng(uint64_t seed) : root_(seed), engine_(splitmix64(seed)) {}

  uint64_t next_u64() { return engine_(); }

  // [0, 1)
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [lo, hi] inclusive
  int uniform_int(int lo, int hi) {
    const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(next_u64() % span);
  }

  bool bernoulli(double p) { return uniform() < p; }

  // Independent child stream; forking never disturbs this stream's state.
  Rng fork(uint64_t tag) const { return Rng(splitmix64(root_ ^ (0x9e3779b97f4a7c15ULL * (tag + 1)))); }

 private:
  uint64_t root_;
  std::mt19937_64 engine_;
};

}  // namespace scaseg

#endif  // SCASEG_RNG_HPP_
