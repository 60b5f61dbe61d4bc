#pragma once

#include <cmath>
#include <cstdint>

namespace structsens {

// splitmix64; used both as a mixer for stream derivation and to seed xoshiro.
inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// xoshiro256++ with explicit stream derivation: independent streams are keyed
// by (seed, k_index, replicate) so parameter sweeps can run replicates in any
// order, on any number of threads, and reproduce bitwise.
class RngStream {
  public:
    RngStream() : RngStream(0, 0, 0) {}

    RngStream(std::uint64_t seed, std::uint64_t k_index, std::uint64_t replicate) {
        std::uint64_t key = seed;
        key = splitmix64(key) ^ (0x9e3779b97f4a7c15ULL * (k_index + 1));
        key = splitmix64(key) ^ (0xd1b54a32d192ed03ULL * (replicate + 1));
        for (auto& word : s_) word = splitmix64(key);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[0] + s_[3], 23) + s_[0];
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // uniform in [0, 1)
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // standard normal via Box-Muller; draws a fresh pair every call so the
    // consumption pattern is one call -> two u64 draws, always.
    double next_gaussian() {
        const double u1 = 1.0 - next_double();  // (0, 1]
        const double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
    }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::uint64_t s_[4];
};

}  // namespace structsens
