#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <string_view>
#include <span>
#include <utility>

namespace metaadapt {

// splitmix64 finalizer; used to derive independent stream seeds.
std::uint64_t MixSeed(std::uint64_t x);

// Derives a child seed from a base seed and a sequence of tags, e.g.
// DeriveSeed(run_seed, {kEpisodeStream, episode_index}).
std::uint64_t DeriveSeed(std::uint64_t base, std::initializer_list<std::uint64_t> tags);

// FNV-1a over the bytes, for deriving seeds from names.
std::uint64_t HashString(std::string_view text);

// Deterministic random source. Distribution helpers are implemented here
// rather than through <random> distributions, whose output is
// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t NextU64() { return engine_(); }

  // Uniform in [0, 1) with 53 bits of resolution.
  double Uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  // Uniform integer in [0, n). n must be > 0.
  std::size_t UniformIndex(std::size_t n);

  double Normal(double mean, double stddev);

  template <typename T>
  void Shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::size_t j = UniformIndex(i);
      std::swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace metaadapt
