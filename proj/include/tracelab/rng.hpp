#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace tracelab::rng {

// SplitMix64 step, used only to spread seed material.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a(std::string_view tag) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : tag) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  return h;
}

/**
 * Deterministic random stream.
 *
 * All draws go through the helpers below rather than std::*_distribution,
 * so sequences are fixed by this code and the (standard-specified)
 * mt19937_64 engine alone.
 */
class Stream {
 public:
  explicit Stream(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1): 53 random bits.
  double next_double01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform index in [0, n). n must be > 0.
  std::size_t uniform_index(std::size_t n) {
    return static_cast<std::size_t>(
        (static_cast<unsigned __int128>(engine_()) * n) >> 64);
  }

  // Draws an index from an (unnormalized, nonnegative) weight vector.
  std::size_t categorical(const std::vector<double>& probs) {
    double u = next_double01();
    double acc = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      if (u < acc) return i;
    }
    return probs.size() - 1;  // rounding leftovers land on the last bucket
  }

 private:
  std::mt19937_64 engine_;
};

// Derives the seed of an independent sub-stream from a root seed and a tag.
inline std::uint64_t derive_seed(std::uint64_t root, std::string_view tag) {
  std::uint64_t s = root ^ (fnv1a(tag) + 0x9E3779B97F4A7C15ULL);
  return splitmix64(s);
}

inline Stream derive_stream(std::uint64_t root, std::string_view tag) {
  return Stream(derive_seed(root, tag));
}

}  // namespace tracelab::rng
