#pragma once

#include <cmath>
#include <cstdint>

namespace berry {

// All randomness flows from one 64-bit master seed. Independent substreams are
// derived by index (splitmix64 of master ^ golden-ratio multiple), so results
// do not depend on evaluation order.

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// xoshiro256** seeded via splitmix64.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64(sm);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0, 1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // One Bernoulli trial.
    bool bernoulli(double p) { return uniform() < p; }

    // Integer in [0, n).
    std::uint64_t below(std::uint64_t n) { return next_u64() % n; }

    double normal() {
        // Box-Muller; second variate discarded for streaming simplicity.
        double u1 = uniform();
        while (u1 == 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::uint64_t s_[4];
};

// Deterministic substream: same (master, index) always yields the same stream.
inline Rng substream(std::uint64_t master, std::uint64_t index) {
    std::uint64_t sm = master ^ (0xD1B54A32D192ED03ULL * (index + 1));
    const std::uint64_t seed = splitmix64(sm);
    return Rng(seed);
}

} // namespace berry
