#ifndef IQME_RNG_HPP
#define IQME_RNG_HPP

// Counter-based random streams. Every stream is a pure function of its key,
// so results do not depend on which thread draws them or in what order.

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace iqme {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Hash of (seed, trajectory, layer, position) used as the stream origin.
inline constexpr std::uint64_t stream_key(std::uint64_t seed, std::uint64_t traj, std::uint64_t layer,
                                          std::uint64_t position) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ traj);
  h = splitmix64(h ^ (layer * 0xd6e8feb86659fd93ULL));
  h = splitmix64(h ^ (position * 0xa0761d6478bd642fULL));
  return h;
}

/// SplitMix64 sequence; satisfies UniformRandomBitGenerator.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(std::uint64_t key) : state_(key) {}
  CounterRng(std::uint64_t seed, std::uint64_t traj, std::uint64_t layer, std::uint64_t position)
      : state_(stream_key(seed, traj, layer, position)) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    const std::uint64_t out = splitmix64(state_);
    state_ += 0x9e3779b97f4a7c15ULL;
    return out;
  }

  /// Uniform on (0, 1] with 53 random bits.
  double uniform() { return (static_cast<double>((*this)() >> 11) + 1.0) * 0x1.0p-53; }

  /// Standard normal via Box-Muller; the second variate is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double rad = std::sqrt(-2.0 * std::log(uniform()));
    const double ang = 2.0 * std::numbers::pi * uniform();
    spare_ = rad * std::sin(ang);
    has_spare_ = true;
    return rad * std::cos(ang);
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace iqme

#endif  // IQME_RNG_HPP
