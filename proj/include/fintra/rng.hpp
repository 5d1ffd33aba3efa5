#pragma once

#include <array>
#include <cstdint>

namespace fintra {

// Philox4x32-10 counter-based generator. Stateless: every 128-bit counter
// block maps independently to four 32-bit words, so draws keyed by
// (seed, path, index) are reproducible regardless of evaluation order or
// thread count.
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

// Domains keep distinct uses of the same (seed, path, index) triple from
// colliding in counter space.
enum class RngDomain : std::uint32_t {
    increment = 0,
    enlargement = 1,
};

// Standard Gaussian via Box-Muller on the Philox uniform output.
double gaussian_draw(std::uint64_t seed, std::uint64_t path, std::uint32_t index,
                     RngDomain domain);

// SplitMix64 step; used to derive independent sub-seeds.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t salt);

}  // namespace fintra
