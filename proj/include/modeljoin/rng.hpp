#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <utility>
#include <vector>

namespace modeljoin {

// All randomness in the project flows through this generator. Standard-library
// distributions are implementation-defined, so draws are produced by hand to
// keep outputs bit-identical across platforms and worker counts.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct SplitMix64 {
  std::uint64_t state = 0;

  SplitMix64() = default;
  explicit SplitMix64(std::uint64_t seed) : state(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    return mix64(z);
  }

  // Uniform in [0, 1) with 53 bits of mantissa.
  double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  std::uint64_t next_below(std::uint64_t n) {
    // Rejection keeps the draw unbiased and deterministic.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t r = next();
    while (r >= limit) r = next();
    return r % n;
  }

  double next_gaussian() {
    double u1 = next_double();
    double u2 = next_double();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }
};

// Counter-based stream derivation: row r of a run depends only on
// (master seed, r), which makes generation embarrassingly parallel.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
  return mix64(master + 0x9e3779b97f4a7c15ULL * (index + 1));
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

template <typename T>
void deterministic_shuffle(std::vector<T>& items, SplitMix64& gen) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(gen.next_below(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace modeljoin
