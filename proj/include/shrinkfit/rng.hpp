#pragma once

#include <cstdint>
#include <vector>

namespace shrinkfit {

namespace detail {
// SplitMix64 finalizer. Bijective on 64-bit words.
inline std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace detail

// Deterministic 64-bit generator with cheap keyed sub-streams.
//
// Streams are derived by mixing (seed, stream, substream) through the
// SplitMix64 finalizer, so replication streams keyed by (study seed,
// rep index, purpose) are independent of evaluation order and of each
// other. All derived quantities (uniforms, normals, shuffles) are
// computed in-house so results are bit-identical across platforms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(detail::mix64(seed + 0x9e3779b97f4a7c15ULL)) {}

  static Rng keyed(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream = 0) {
    std::uint64_t h = detail::mix64(seed + 0x9e3779b97f4a7c15ULL);
    h = detail::mix64(h ^ detail::mix64(stream + 0xd1b54a32d192ed03ULL));
    h = detail::mix64(h ^ detail::mix64(substream + 0x8cb92ba72f3d8dd7ULL));
    return Rng(raw_tag{}, h);
  }

  std::uint64_t next_u64() {
    state_ += 0x9e3779b97f4a7c15ULL;
    return detail::mix64(state_);
  }

  // Uniform on [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via inverse-CDF (see normal.hpp); platform-stable.
  double normal();

  double normal(double mean, double sd) { return mean + sd * normal(); }

  bool bernoulli(double p) { return uniform() < p; }

  // Uniform integer in [0, bound) by rejection; bound > 0.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % bound;
  }

  // Fisher-Yates; explicit implementation so permutations do not depend
  // on the standard library's std::shuffle internals.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  struct raw_tag {};
  Rng(raw_tag, std::uint64_t raw_state) : state_(raw_state) {}
  std::uint64_t state_;
};

}  // namespace shrinkfit
