#pragma once

#include <cstdint>

namespace nlkpp {

// SplitMix64 finalizer: the single hash primitive behind every seeded draw.
// Counter-based use (hash of seed ^ index) keeps media evaluation pure, so
// shifted copies of a field can re-derive identical values from coordinates.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Sequential stream view for the few places that need iid draws (bump centers).
class RngStream {
 public:
    explicit RngStream(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() { return splitmix64(state_++); }

    // Uniform in [0,1) with 53 random bits; platform-stable (integer ops + one multiply).
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

 private:
    std::uint64_t state_;
};

}  // namespace nlkpp
