#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <utility>

namespace textrisk {

// Stream tags for Rng::stream. Every random decision in a run derives from one
// master seed through a tag and a path of indices (fold, config, replicate...).
enum class Stream : std::uint64_t {
  folds = 1,
  head_split = 2,
  head_train = 3,
  gbdt = 4,
  genetic = 5,
  bootstrap = 6,
  synth = 7,
  fitness = 8,
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

// Portable generator: std::mt19937_64 raw output (fully specified by the
// standard) with distributions implemented here, since the standard library
// distributions differ between implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Child stream: seed = fold of splitmix64 over (master, tag, path...).
  static Rng stream(std::uint64_t master, Stream tag, std::initializer_list<std::uint64_t> path = {});
  static std::uint64_t derive_seed(std::uint64_t master, Stream tag,
                                   std::initializer_list<std::uint64_t> path = {});

  std::uint64_t next() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n); n > 0. Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t n);

  // Uniform integer in [lo, hi].
  std::int64_t between(std::int64_t lo, std::int64_t hi) {
    return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  bool bernoulli(double p) { return uniform() < p; }

  double normal();

  template <typename T>
  void shuffle(std::span<T> values) {
    for (std::size_t i = values.size(); i > 1; --i) {
      std::size_t j = below(i);
      using std::swap;
      swap(values[i - 1], values[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace textrisk
