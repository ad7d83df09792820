// Seeded, platform-independent randomness.
//
// Engine: xoshiro256** (Blackman & Vigna), state seeded with four successive
// splitmix64 outputs. Both algorithms are fixed bit-for-bit, so a seed yields
// the same stream on every platform. Doubles come from the top 53 bits.
#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace csdr {

class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();

  // Uniform in [0, 1).
  double next_double();

  // Uniform in [lo, hi).
  double uniform(double lo, double hi);

  // Uniform in [0, bound), unbiased via rejection. bound must be > 0.
  std::uint64_t below(std::uint64_t bound);

  // Independent substream keyed by salt; does not advance this stream.
  Rng derive(std::uint64_t salt) const;

  // Fisher-Yates, driven by below().
  template <class T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i + 1));
      using std::swap;
      swap(v[i], v[j]);
    }
  }

  std::uint64_t seed() const { return seed_; }

 private:
  std::uint64_t seed_ = 0;
  std::uint64_t state_[4] = {0, 0, 0, 0};
};

}  // namespace csdr
