#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <utility>
#include <vector>

namespace wmg {

/// Stable 64-bit hash of a label (FNV-1a). Used to name random streams.
std::uint64_t hash_label(std::string_view label) noexcept;

/// Seed of the stream identified by (root, label, index). Depends only on its
/// arguments, so streams can be created in any order or on any thread.
std::uint64_t derive_seed(std::uint64_t root, std::string_view label,
                          std::uint64_t index = 0) noexcept;

/// Platform-stable random source. The std distributions are implementation
/// defined, so uniform/normal sampling is done here on top of mt19937_64.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  static Rng stream(std::uint64_t root, std::string_view label,
                    std::uint64_t index = 0) {
    return Rng(derive_seed(root, label, index));
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer on [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);

  /// Standard normal (Box-Muller, pairs cached).
  double normal();

  double normal(double mean, double sd) { return mean + sd * normal(); }

  template <class T>
  void shuffle(std::vector<T>& items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_index(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  /// First k entries of a uniformly random permutation of items (partial
  /// Fisher-Yates); the remaining entries follow in unspecified order.
  template <class T>
  void partial_shuffle(std::vector<T>& items, std::size_t k) {
    const std::size_t n = items.size();
    for (std::size_t i = 0; i < k && i + 1 < n; ++i) {
      const auto j = i + static_cast<std::size_t>(uniform_index(n - i));
      std::swap(items[i], items[j]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace wmg
