#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <utility>

namespace modrec {

// Deterministic random generator: xoshiro256++ (Blackman & Vigna, 2019)
// seeded through the splitmix64 finalizer. The stream is a pure function
// of the 64-bit seed, so identical seeds give identical draws on every
// platform.
//
// Constants, for the record:
//   splitmix64 increment  0x9E3779B97F4A7C15
//   splitmix64 mixers     0xBF58476D1CE4E5B9, 0x94D049BB133111EB
//   xoshiro256++ rotations 23 / 45, shift 17
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : seed_(seed) {
        std::uint64_t x = seed;
        for (auto& s : state_) {
            x += 0x9E3779B97F4A7C15ULL;
            s = mix64(x);
        }
    }

    std::uint64_t seed() const { return seed_; }

    // Derives an independent generator from (original seed, index). Splits
    // of the same (seed, index) pair always produce the same stream, no
    // matter how much the parent has been consumed.
    Rng split(std::uint64_t index) const {
        return Rng(mix64(seed_ + 0x9E3779B97F4A7C15ULL * (index + 1)));
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, 1), 53 significant bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

    // One Box-Muller pair of independent standard normals.
    std::pair<double, double> normal_pair() {
        const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        return {r * std::cos(a), r * std::sin(a)};
    }

    double normal() { return normal_pair().first; }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    static std::uint64_t mix64(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t seed_;
    std::uint64_t state_[4];
};

}  // namespace modrec
