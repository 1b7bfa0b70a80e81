#pragma once

#include <cstdint>

namespace pbelab {

/// Counter-based uniform generator: every draw is a pure function of
/// (seed, counter, lane), so runs replay bit-for-bit and any iteration can be
/// regenerated without replaying the ones before it.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t bits(std::uint64_t counter, std::uint32_t lane) const noexcept {
        std::uint64_t x = mix(seed_ ^ 0x6a09e667f3bcc909ULL);
        x = mix(x ^ (counter * 0x9e3779b97f4a7c15ULL));
        return mix(x + lane * 0xbb67ae8584caa73bULL);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform(std::uint64_t counter, std::uint32_t lane) const noexcept {
        return static_cast<double>(bits(counter, lane) >> 11) * 0x1.0p-53;
    }

private:
    // splitmix64 finalizer
    static std::uint64_t mix(std::uint64_t z) noexcept {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t seed_;
};

}  // namespace pbelab
