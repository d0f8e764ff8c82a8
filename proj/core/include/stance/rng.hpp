#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace stance {

// Deterministic random source. std::mt19937_64 is fully specified by the
// standard; the derived draws below avoid std::uniform_real_distribution and
// std::shuffle, whose algorithms are implementation-defined, so identical
// seeds give identical streams on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next() { return gen_(); }

  // Uniform double in [0, 1), 53 random bits.
  double uniform() {
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Modulo bias is negligible for the small
  // bounds used here and keeps the draw platform-stable.
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next() % n; }

  // Fisher-Yates with a fixed draw rule.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // FNV-1a over the tag folded into the seed; used to derive independent
  // streams (per target, per epoch) from one run seed.
  static std::uint64_t derive(std::uint64_t seed, std::string_view tag) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : tag) {
      h ^= c;
      h *= 0x100000001b3ull;
    }
    for (int i = 0; i < 8; ++i) {
      h ^= (seed >> (8 * i)) & 0xffu;
      h *= 0x100000001b3ull;
    }
    return h;
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace stance
