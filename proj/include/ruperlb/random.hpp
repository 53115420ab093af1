#pragma once

#include <cstdint>

namespace ruperlb {

/// One splitmix64 step; a good mixer for turning counters into seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// xorshift64* generator. The state must be non-zero; `seeded` derives one
/// with splitmix64 so any seed works.
class XorShift64Star {
public:
    explicit XorShift64Star(std::uint64_t state) : state_(state ? state : 1) {}
    static XorShift64Star seeded(std::uint64_t seed) { return XorShift64Star(splitmix64(seed)); }

    std::uint64_t next() noexcept {
        state_ ^= state_ >> 12;
        state_ ^= state_ << 25;
        state_ ^= state_ >> 27;
        return state_ * 0x2545F4914F6CDD1DULL;
    }

    /// Uniform double in [0, 1).
    double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

private:
    std::uint64_t state_;
};

} // namespace ruperlb
