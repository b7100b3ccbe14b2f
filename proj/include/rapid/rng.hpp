#pragma once

#include <cstdint>

namespace rapid {

// Reproducible 64-bit generator: xoshiro256++ seeded via splitmix64.
// Pure integer arithmetic, so the draw sequence for a given seed is
// identical across platforms and compilers. Uniform doubles take the
// top 53 bits, giving values in [0, 1).
class rng_stream {
public:
    explicit rng_stream(uint64_t seed);

    uint64_t next_u64();

    // u in [0, 1)
    double uniform();

    // uniform integer in [0, n)
    uint64_t next_below(uint64_t n);

    uint64_t seed() const { return seed_; }

    static constexpr const char* algorithm_id = "xoshiro256++/splitmix64-seed/u53";

private:
    uint64_t seed_;
    uint64_t s_[4];
};

}  // namespace rapid
