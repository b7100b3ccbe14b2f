#include "rapid/rng.hpp"

namespace rapid {

namespace {

uint64_t splitmix64(uint64_t& x) {
    x += 0x9E3779B97F4A7C15ULL;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

uint64_t rotl(uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

}  // namespace

rng_stream::rng_stream(uint64_t seed) : seed_(seed) {
    uint64_t sm = seed;
    for (auto& s : s_) {
        s = splitmix64(sm);
    }
}

uint64_t rng_stream::next_u64() {
    const uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double rng_stream::uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

uint64_t rng_stream::next_below(uint64_t n) {
    // rejection-free modulo is fine here: n is tiny relative to 2^64,
    // and reproducibility matters more than the ~n/2^64 bias
    return next_u64() % n;
}

}  // namespace rapid
