#pragma once

#include <cstdint>
#include <numbers>
#include <string_view>

namespace qmt {

// Seeded randomness helpers. Everything below is fully specified arithmetic:
// no std distribution objects, so the same seed gives the same stream on any
// platform.

inline uint64_t splitmix64(uint64_t& state) {
    state += 0x9e3779b97f4a7c15ull;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline uint64_t mix_seed(uint64_t seed, uint64_t salt) {
    uint64_t s = seed ^ (0x9e3779b97f4a7c15ull + (salt << 1));
    uint64_t a = splitmix64(s);
    uint64_t b = splitmix64(s);
    return a ^ (b >> 1);
}

inline uint64_t fnv1a64(std::string_view bytes) {
    uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

/// Deterministic generator (splitmix64 core) used for every seeded draw in
/// the workbench.
class Rng {
  public:
    explicit Rng(uint64_t seed) : state_(seed) {
        // decorrelate trivially related seeds (0, 1, 2, ...)
        splitmix64(state_);
    }

    uint64_t next_u64() { return splitmix64(state_); }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform double in [0, 2*pi).
    double uniform_angle() { return uniform() * 2.0 * std::numbers::pi; }

    /// Uniform integer in [0, n), n >= 1.
    uint64_t uniform_index(uint64_t n) { return next_u64() % n; }

    /// Uniform double in [lo, hi).
    double uniform_in(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Fisher-Yates shuffle.
    template <typename Seq>
    void shuffle(Seq& seq) {
        for (size_t i = seq.size(); i > 1; --i) {
            size_t j = static_cast<size_t>(uniform_index(i));
            std::swap(seq[i - 1], seq[j]);
        }
    }

  private:
    uint64_t state_;
};

}  // namespace qmt
