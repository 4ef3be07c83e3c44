#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace stel {

// Counter-based random numbers (Philox4x32-10). Every draw is a pure function
// of (seed, sample_index, stream, position), so results do not depend on call
// order, thread count, or how work is partitioned across workers. That makes
// bit-identical replay a structural property instead of a scheduling accident.
namespace rng {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
    constexpr std::uint32_t kM0 = 0xD2511F53u;
    constexpr std::uint32_t kM1 = 0xCD9E8D57u;
    constexpr std::uint32_t kW0 = 0x9E3779B9u;
    constexpr std::uint32_t kW1 = 0xBB67AE85u;
    for (int round = 0; round < 10; ++round) {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kM0) * ctr[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kM1) * ctr[2];
        const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
        const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
        const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
        const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
        ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
        key[0] += kW0;
        key[1] += kW1;
    }
    return ctr;
}

// Strictly inside (0,1): 53 high bits plus a half-ulp offset, so log() is safe.
inline double to_unit_interval(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = (static_cast<std::uint64_t>(hi) << 32) | lo;
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace rng

// Stream of independent N(0,1) draws addressed by (seed, sample, stream).
// Supports both sequential draws and O(1) random access by position.
class NormalStream {
public:
    NormalStream(std::uint64_t seed, std::uint64_t sample_index, std::uint64_t stream)
        : key_{derive_key(seed, sample_index, stream)} {}

    [[nodiscard]] double at(std::uint64_t position) const {
        const std::uint64_t block = position >> 1;
        const auto out = rng::philox4x32(
            {static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32), 0u, 0u},
            key_);
        const double u1 = rng::to_unit_interval(out[0], out[1]);
        const double u2 = rng::to_unit_interval(out[2], out[3]);
        constexpr double kTwoPi = 6.283185307179586476925287;
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = kTwoPi * u2;
        return (position & 1u) ? r * std::sin(a) : r * std::cos(a);
    }

    double next() { return at(pos_++); }

private:
    static std::array<std::uint32_t, 2> derive_key(std::uint64_t seed, std::uint64_t sample,
                                                   std::uint64_t stream) {
        const std::uint64_t mixed =
            rng::splitmix64(seed ^ rng::splitmix64(sample ^ rng::splitmix64(stream)));
        return {static_cast<std::uint32_t>(mixed), static_cast<std::uint32_t>(mixed >> 32)};
    }

    std::array<std::uint32_t, 2> key_;
    std::uint64_t pos_ = 0;
};

}  // namespace stel
