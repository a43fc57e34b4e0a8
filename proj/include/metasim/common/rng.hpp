#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <utility>
#include <vector>

namespace metasim {

/// Seeded generator whose outputs are identical on every standard library:
/// the engine and seed_seq are fully specified, and the distribution
/// helpers below avoid the implementation-defined std distributions.
class Rng {
 public:
  /// `stream` words are mixed into the seed so independent draws (split,
  /// sample index, purpose) never share a sequence.
  explicit Rng(std::uint64_t seed, std::initializer_list<std::uint64_t> stream = {});

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1) with 53 random bits.
  double uniform01();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }
  /// Uniform integer in [0, n); n > 0. Unbiased (rejection sampling).
  std::size_t index(std::size_t n);
  int uniform_int(int lo, int hi) { return lo + static_cast<int>(index(static_cast<std::size_t>(hi - lo + 1))); }

  template <typename T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      std::swap(items[i - 1], items[index(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace metasim
