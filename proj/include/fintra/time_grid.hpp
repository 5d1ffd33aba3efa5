#pragma once

#include <cstddef>
#include <vector>

namespace fintra {

/**
 * Dyadic partition of [0, T] at refinement level N: the 2^N + 1 points
 * t_l = l * T / 2^N. Grid times are recomputed from (l, T, N) on demand
 * instead of being accumulated, so refinement levels stay mutually
 * consistent in floating point. Immutable after construction.
 */
class DyadicGrid {
public:
    DyadicGrid(int level, double horizon);

    int level() const { return level_; }
    double horizon() const { return horizon_; }

    // Number of blocks 2^N; the grid has block_count() + 1 times.
    std::size_t block_count() const { return block_count_; }
    double block_width() const { return block_width_; }

    // t_l = l * T / 2^N for l = 0 .. 2^N.
    double time(std::size_t l) const;
    std::vector<double> times() const;

    // Index k of the block [t_k, t_{k+1}) containing t; t = T maps to the
    // last block. Throws std::invalid_argument for t outside [0, T].
    std::size_t block_index(double t) const;

    // min(tau, t_{k+1}) - min(tau, t_k): the piece of block k swept by
    // [0, tau]. Nondecreasing in tau with values in [0, block_width()].
    double clip_weight(std::size_t k, double tau) const;

    bool operator==(const DyadicGrid& other) const {
        return level_ == other.level_ && horizon_ == other.horizon_;
    }

private:
    int level_;
    double horizon_;
    std::size_t block_count_;
    double block_width_;
};

DyadicGrid build_grid(int level, double horizon);

// Level N+1 grid over the same horizon; every time of the input grid is a
// time of the output grid.
DyadicGrid refine(const DyadicGrid& grid);

}  // namespace fintra
