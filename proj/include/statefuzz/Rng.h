#pragma once

#include <cstdint>
#include <random>

namespace statefuzz {

/* All randomness flows through mt19937_64 driven by raw engine draws; the
 * standard pins the engine's output sequence, so campaigns are reproducible
 * across platforms for a fixed seed. std::*_distribution is avoided on
 * purpose (its mapping is implementation-defined). */
class Rng {
public:
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next() { return engine_(); }

    /* Uniform-ish integer in [lo, hi]; modulo bias is irrelevant at these
     * range sizes and determinism matters more than exactness here. */
    uint64_t range(uint64_t lo, uint64_t hi) {
        if (hi <= lo) return lo;
        return lo + next() % (hi - lo + 1);
    }

    uint8_t byte() { return uint8_t(next() & 0xff); }

    bool coin() { return (next() & 1) != 0; }

private:
    std::mt19937_64 engine_;
};

/* SplitMix64 finalizer; used to derive independent per-execution seeds from
 * (campaign seed, execution ordinal) so replay does not depend on scheduling. */
inline uint64_t mixSeed(uint64_t a, uint64_t b) {
    uint64_t z = a + 0x9e3779b97f4a7c15ULL * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

}  // namespace statefuzz
