#pragma once

#include <cstdint>

namespace bitw {

// SplitMix64. Self-contained so that seeded runs are bit-reproducible
// regardless of the standard library's distribution implementations.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
        return z ^ (z >> 31);
    }

    // [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    float uniform(float lo, float hi) {
        return lo + static_cast<float>(uniform()) * (hi - lo);
    }

    // [0, n)
    uint64_t below(uint64_t n) { return n == 0 ? 0 : next_u64() % n; }

    // Independent derived stream.
    Rng fork(uint64_t stream) const {
        Rng child(state_ ^ (0xa0761d6478bd642full * (stream + 1)));
        child.next_u64();
        return child;
    }

private:
    uint64_t state_;
};

} // namespace bitw
