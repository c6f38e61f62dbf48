#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <utility>

namespace panelvit {

/// Seeded generator with platform-independent draws.
///
/// The standard distributions are implementation-defined, so the
/// conversions from raw 64-bit words to floats and bounded integers are
/// done here. Counter-derived substreams let independent consumers (an
/// epoch shuffle, one sample's augmentation, a batch's dropout masks) draw
/// from decorrelated sequences that do not depend on call order.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  /// Stream keyed by `seed` and an ordered list of counters.
  static Rng substream(std::uint64_t seed, std::initializer_list<std::uint64_t> counters);

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform in [0, 1) with 53 random mantissa bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Unbiased integer in [0, n). `n` must be positive.
  std::uint64_t below(std::uint64_t n);

  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      using std::swap;
      swap(items[i - 1], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

/// splitmix64 finalizer; used to derive substream seeds.
std::uint64_t mix64(std::uint64_t x) noexcept;

}  // namespace panelvit
