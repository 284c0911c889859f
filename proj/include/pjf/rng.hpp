#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace pjf {

/// Stream tags for the counter-based split of a master seed. Marks get their
/// own stream so that refining dt leaves the realized jump marks untouched.
enum class StreamTag : std::uint64_t {
  Diffusion = 1,
  Marks = 2,
  Particles = 3,
  Resampling = 4,
  Pilot = 5,
  Replicate = 6,
};

constexpr std::uint64_t splitmix64(std::uint64_t& state) noexcept {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// Hashes (seed, stream, index) into a 64-bit key. Distinct triples give
/// statistically independent xoshiro states.
constexpr std::uint64_t derive_key(std::uint64_t seed, StreamTag tag, std::uint64_t index) noexcept {
  std::uint64_t s = seed;
  std::uint64_t h = splitmix64(s);
  s = h ^ (static_cast<std::uint64_t>(tag) * 0xD1B54A32D192ED03ULL);
  h = splitmix64(s);
  s = h ^ (index * 0xAEF17502108EF2D9ULL + 0x632BE59BD9B4E019ULL);
  return splitmix64(s);
}

/// xoshiro256** with a Marsaglia-polar normal sampler.
class Rng {
 public:
  Rng() : Rng(0) {}
  explicit Rng(std::uint64_t key) noexcept {
    std::uint64_t s = key;
    for (auto& w : state_) w = splitmix64(s);
  }
  Rng(std::uint64_t seed, StreamTag tag, std::uint64_t index) noexcept : Rng(derive_key(seed, tag, index)) {}

  std::uint64_t next() noexcept {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform on [0, 1).
  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double normal() noexcept {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

 private:
  static constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

  std::array<std::uint64_t, 4> state_{};
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace pjf
