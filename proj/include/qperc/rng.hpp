#pragma once

// Counter-based pseudo-random streams with portable, platform-independent
// output.  Every ensemble realization derives its own stream from a small
// set of integer keys, so results are reproducible bit-for-bit regardless
// of execution order or thread count.  std::uniform_int_distribution is
// deliberately avoided: its output is implementation-defined.

#include <cstdint>
#include <limits>
#include <numeric>
#include <vector>

namespace qperc {

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// Finalizer of the splitmix64 generator; a strong 64-bit bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z ^= z >> 30;
  z *= 0xbf58476d1ce4e5b9ULL;
  z ^= z >> 27;
  z *= 0x94d049bb133111ebULL;
  z ^= z >> 31;
  return z;
}

}  // namespace detail

// splitmix64: tiny, fast, passes BigCrush, and trivially seedable.
class SplitMix64 {
 public:
  explicit constexpr SplitMix64(std::uint64_t seed) : state_(seed) {}

  constexpr std::uint64_t next() {
    state_ += detail::kGolden;
    return detail::mix64(state_);
  }

  // Uniform integer in [0, bound) by rejection sampling (no modulo bias).
  std::uint64_t uniform_below(std::uint64_t bound) {
    // Accept draws in [threshold, 2^64); that range has size k*bound.
    const std::uint64_t threshold = (0ULL - bound) % bound;
    for (;;) {
      const std::uint64_t r = next();
      if (r >= threshold) return r % bound;
    }
  }

 private:
  std::uint64_t state_;
};

// Collapses (seed, a, b) into one well-mixed stream seed.  Used to key the
// per-realization generators: a is the realization ordinal, b a salt that
// distinguishes sampling modes.
constexpr std::uint64_t stream_key(std::uint64_t seed, std::uint64_t a,
                                   std::uint64_t b = 0) {
  std::uint64_t k = detail::mix64(seed + detail::kGolden);
  k = detail::mix64(k ^ (a + 2 * detail::kGolden));
  k = detail::mix64(k ^ (b + 3 * detail::kGolden));
  return k;
}

// Fisher-Yates shuffle of {0, 1, ..., n-1}.
inline std::vector<std::uint32_t> shuffled_iota(std::uint32_t n,
                                                SplitMix64& rng) {
  std::vector<std::uint32_t> p(n);
  std::iota(p.begin(), p.end(), 0u);
  for (std::uint32_t i = 0; i + 1 < n; ++i) {
    const auto j =
        i + static_cast<std::uint32_t>(rng.uniform_below(n - i));
    std::swap(p[i], p[j]);
  }
  return p;
}

}  // namespace qperc
