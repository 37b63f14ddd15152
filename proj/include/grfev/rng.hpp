#pragma once

// Deterministic random number generation. All draw algorithms are written
// out explicitly (no std::*_distribution) so that a seeded run reproduces
// bit-identically across standard library implementations.
//
// Stream derivation: every Monte Carlo phase draws from an Rng obtained as
//   derive_rng(master_seed, phase_id, index)
// where phase_id is one of the constants in grfev::seeds and index numbers
// parallel units (rungs, replicates, datasets). Each (master, phase, index)
// triple yields an independent stream regardless of scheduling order.

#include <cmath>
#include <cstdint>
#include <random>

namespace grfev {

// splitmix64 finalizer
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed), seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return gen_(); }

  // uniform on [0, 1), 53 bits
  double uniform() { return double(gen_() >> 11) * 0x1.0p-53; }

  // uniform on (0, 1); safe to take logs of
  double uniform_pos() {
    double u;
    do {
      u = uniform();
    } while (u == 0.0);
    return u;
  }

  // uniform integer in [0, n)
  std::uint64_t uniform_below(std::uint64_t n) {
    return std::uint64_t((static_cast<unsigned __int128>(gen_()) * n) >> 64);
  }

  // standard normal via Box-Muller; one spare kept between calls
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform_pos();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  bool bernoulli(double p) { return uniform() < p; }

 private:
  std::mt19937_64 gen_;
  std::uint64_t seed_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

namespace seeds {
inline constexpr std::uint64_t kMple = 1;
inline constexpr std::uint64_t kMcmle = 2;
inline constexpr std::uint64_t kMoments = 3;
inline constexpr std::uint64_t kZPath = 4;        // index = rung
inline constexpr std::uint64_t kPowerChain = 5;   // index = rung
inline constexpr std::uint64_t kChib = 6;
inline constexpr std::uint64_t kReplicate = 7;    // index = replicate
inline constexpr std::uint64_t kDataset = 8;      // index = dataset
inline constexpr std::uint64_t kSampler = 9;
inline constexpr std::uint64_t kTune = 10;
}  // namespace seeds

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t phase,
                                 std::uint64_t index = 0) {
  return mix64(mix64(master ^ mix64(phase)) ^ mix64(index));
}

inline Rng derive_rng(std::uint64_t master, std::uint64_t phase,
                      std::uint64_t index = 0) {
  return Rng(derive_seed(master, phase, index));
}

}  // namespace grfev
