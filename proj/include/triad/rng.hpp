#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>

namespace triad {

/// Splitmix64 stream. Cheap to fork into independent, purpose-named
/// substreams so parameter init, data sampling, and batch shuffling never
/// share state regardless of which features are enabled.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double next_unit() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform integer in [lo, hi).
  int next_int(int lo, int hi) {
    return lo + static_cast<int>(next_u64() % static_cast<std::uint64_t>(hi - lo));
  }

  bool next_bernoulli(double p) { return next_unit() < p; }

  /// Standard normal via Box-Muller.
  double next_gaussian() {
    double u1 = next_unit();
    double u2 = next_unit();
    while (u1 <= 0.0) u1 = next_unit();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  /// Independent substream derived from this stream's seed and a label.
  /// Does not advance the parent stream.
  Rng fork(std::string_view label) const {
    Rng child(state_ ^ (hash(label) | 1ULL));
    child.next_u64();
    return child;
  }

  Rng fork(std::uint64_t salt) const {
    Rng child(state_ ^ (salt * 0x9e3779b97f4a7c15ULL + 0x632be59bd9b4e019ULL));
    child.next_u64();
    return child;
  }

  /// FNV-1a 64-bit.
  static std::uint64_t hash(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
    return h;
  }

 private:
  std::uint64_t state_;
};

}  // namespace triad
