#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string_view>

namespace bsgd {

/// Seeded generator with platform-independent output.
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. The standard distributions are implementation-defined, so the
/// conversions to doubles, bounded indices and normals are done here:
///  - uniform(): top 53 bits of one draw, scaled by 2^-53, in [0, 1);
///  - index(n): rejection sampling on the low-biased range, unbiased;
///  - normal(): Marsaglia polar method (only sqrt and log).
class Rng {
 public:
  static constexpr std::string_view algorithm =
      "mt19937_64 + 53-bit uniform + rejection index + Marsaglia polar normal";

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }

  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be positive.
  std::size_t index(std::size_t n) {
    const std::uint64_t bound = n;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t v = engine_();
    while (v >= limit) v = engine_();
    return static_cast<std::size_t>(v % bound);
  }

  double normal();

  friend bool operator==(const Rng& a, const Rng& b) {
    return a.engine_ == b.engine_ && a.has_spare_ == b.has_spare_ && a.spare_ == b.spare_;
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace bsgd
