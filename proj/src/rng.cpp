#include "fintra/rng.hpp"

#include <cmath>
#include <numbers>

namespace fintra {

namespace {

constexpr std::uint32_t kWeylA = 0x9E3779B9u;
constexpr std::uint32_t kWeylB = 0xBB67AE85u;
constexpr std::uint32_t kMulA = 0xD2511F53u;
constexpr std::uint32_t kMulB = 0xCD9E8D57u;

inline void round_once(std::array<std::uint32_t, 4>& ctr,
                       const std::array<std::uint32_t, 2>& key) {
    const std::uint64_t p0 = static_cast<std::uint64_t>(kMulA) * ctr[0];
    const std::uint64_t p1 = static_cast<std::uint64_t>(kMulB) * ctr[2];
    const std::uint32_t hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const std::uint32_t lo0 = static_cast<std::uint32_t>(p0);
    const std::uint32_t hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const std::uint32_t lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key) {
    for (int r = 0; r < 10; ++r) {
        round_once(counter, key);
        key[0] += kWeylA;
        key[1] += kWeylB;
    }
    return counter;
}

double gaussian_draw(std::uint64_t seed, std::uint64_t path, std::uint32_t index,
                     RngDomain domain) {
    const std::array<std::uint32_t, 4> ctr = {
        index,
        static_cast<std::uint32_t>(path),
        static_cast<std::uint32_t>(path >> 32),
        static_cast<std::uint32_t>(domain),
    };
    const std::array<std::uint32_t, 2> key = {
        static_cast<std::uint32_t>(seed),
        static_cast<std::uint32_t>(seed >> 32),
    };
    const auto out = philox4x32(ctr, key);
    // u1 in (0, 1], u2 in (0, 1): keeps log and cos well defined.
    const double u1 = (static_cast<double>(out[0]) + 1.0) * 0x1p-32;
    const double u2 = (static_cast<double>(out[1]) + 0.5) * 0x1p-32;
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

}  // namespace fintra
