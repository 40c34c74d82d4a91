#pragma once

#include <cstdint>
#include <span>
#include <utility>

namespace autorad {

/// SplitMix64 step; used to expand seeds into generator states.
std::uint64_t splitmix64(std::uint64_t& state);

/// Independent sub-seed for stream `stream` of a run seeded with `seed`.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// xorshift64* generator with a Box-Muller gaussian. The exact bit-level
/// definition is in docs/rng.md; any reimplementation following it produces
/// the same stream.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next_u64();
  /// 53-bit uniform in [0, 1).
  double uniform();
  /// Standard normal; values are produced in pairs and the second is cached.
  double gaussian();
  /// next_u64() % n, n > 0.
  std::uint64_t below(std::uint64_t n);

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Fisher-Yates, i from n-1 down to 1, j = below(i + 1).
template <typename T>
void shuffle(std::span<T> items, Rng& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.below(i));
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace autorad
