#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <initializer_list>

namespace mtd {

/// Stateless splitmix64 finalizer; used both to expand seeds and to derive
/// independent child seeds from a base seed plus integer tags.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Child-seed derivation: fold each tag into the state with one splitmix
/// step. derive_seed(s, {a, b}) != derive_seed(s, {b, a}) in general, which
/// is what makes (method, sigma index, trial) streams independent.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags) {
    std::uint64_t s = base;
    std::uint64_t h = splitmix64_next(s);
    for (std::uint64_t t : tags) {
        s = h ^ (t * 0xD1342543DE82EF95ULL + 0x2545F4914F6CDD1DULL);
        h = splitmix64_next(s);
    }
    return h;
}

/// xoshiro256++ with splitmix64 seeding. All stochastic operations in this
/// project draw from this generator so results are reproducible bit-for-bit
/// across platforms and independent of the C++ standard library.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t s = seed;
        for (auto& w : state_) w = splitmix64_next(s);
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

    /// Uniform double in [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

    /// Unbiased uniform integer in [0, bound). Lemire's multiply-shift with
    /// rejection; bound must be nonzero.
    std::uint64_t below(std::uint64_t bound) {
        std::uint64_t x = next_u64();
        unsigned __int128 m = static_cast<unsigned __int128>(x) * bound;
        auto lo = static_cast<std::uint64_t>(m);
        if (lo < bound) {
            const std::uint64_t threshold = (0 - bound) % bound;
            while (lo < threshold) {
                x = next_u64();
                m = static_cast<unsigned __int128>(x) * bound;
                lo = static_cast<std::uint64_t>(m);
            }
        }
        return static_cast<std::uint64_t>(m >> 64);
    }

    /// Standard normal via Box-Muller; the sine partner is cached so a
    /// stream of normals consumes exactly one pair of uniforms per two
    /// variates.
    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        // u1 in (0,1] so the log is finite.
        const double u1 = 1.0 - uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        have_cached_ = true;
        return r * std::cos(a);
    }

  private:
    static std::uint64_t rotl(std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

    std::array<std::uint64_t, 4> state_{};
    double cached_ = 0.0;
    bool have_cached_ = false;
};

}  // namespace mtd
