#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace doser {

inline uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seeded generator with explicit stream splitting.
///
/// All randomness in the project flows through this type so that results are
/// reproducible bit-for-bit from a single 64-bit seed. split(tag) derives an
/// independent stream from the *constructing* seed, not the current state, so
/// parallel callers can fan out work without coordinating draw order.
class Rng {
public:
    explicit Rng(uint64_t seed) : seed_(seed), gen_(splitmix64(seed)) {}

    uint64_t next_u64() { return gen_(); }

    /// Uniform double in [0, 1).
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    /// Uniform double in the open interval (0, 1). Safe for logit().
    double open_uniform() { return (static_cast<double>(gen_() >> 11) + 0.5) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller (one value per call, no cached spare).
    double normal() {
        const double u1 = open_uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    /// Unbiased-enough index in [0, n): 128-bit multiply, bias < n / 2^64.
    size_t index(size_t n) {
        return static_cast<size_t>((static_cast<unsigned __int128>(gen_()) * n) >> 64);
    }

    /// Independent child stream; deterministic in (constructing seed, tag).
    Rng split(uint64_t tag) const { return Rng(splitmix64(seed_ ^ splitmix64(tag + 0x632be59bd9b4e019ULL))); }

    uint64_t seed() const { return seed_; }

private:
    uint64_t seed_;
    std::mt19937_64 gen_;
};

}  // namespace doser
