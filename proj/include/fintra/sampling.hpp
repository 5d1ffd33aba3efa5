#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "fintra/time_grid.hpp"

namespace fintra {

/**
 * A batch of Brownian paths sampled on a dyadic grid, stored as the
 * row-major count x 2^N matrix of increments w(t_{j+1}) - w(t_j), plus an
 * optional independent standard Gaussian drawn at time 0 per path (the
 * filtration-enlargement variable). Every entry is derived from
 * (seed, path index, increment index) by a counter-based generator, so any
 * subset of paths is reproducible independently and evaluation order never
 * changes the numbers.
 */
class PathBatch {
public:
    static PathBatch sample(const DyadicGrid& grid, std::size_t count,
                            std::uint64_t seed, bool enlargement);

    // Wraps externally supplied increments (tests, golden files). The seed
    // is kept for provenance only.
    static PathBatch from_increments(const DyadicGrid& grid,
                                     std::vector<double> increments,
                                     std::optional<std::vector<double>> enlargement_values,
                                     std::uint64_t seed = 0);

    const DyadicGrid& grid() const { return grid_; }
    std::size_t count() const { return count_; }
    std::uint64_t seed() const { return seed_; }
    bool has_enlargement() const { return enlargement_values_.has_value(); }

    std::span<const double> increments(std::size_t path) const;
    double increment(std::size_t path, std::size_t j) const;

    // Increment scaled to unit variance: (w(t_{j+1}) - w(t_j)) / sqrt(delta).
    double normalized(std::size_t path, std::size_t j) const;

    double enlargement_value(std::size_t path) const;

    // w(t_l) = sum of the first l increments; w(0) = 0.
    double brownian(std::size_t path, std::size_t l) const;

    // Normalized increments of this path coarsened to `level` (<= own level),
    // written into out. Coarse increments are left-to-right sums of the
    // 2^(M-N) fine increments they span.
    void fill_normalized_at_level(std::size_t path, int level,
                                  std::vector<double>& out) const;

private:
    PathBatch(DyadicGrid grid, std::size_t count, std::uint64_t seed,
              std::vector<double> increments,
              std::optional<std::vector<double>> enlargement_values);

    DyadicGrid grid_;
    std::size_t count_;
    std::uint64_t seed_;
    std::vector<double> increments_;  // row-major count x 2^N
    std::optional<std::vector<double>> enlargement_values_;
};

PathBatch sample_paths(const DyadicGrid& grid, std::size_t count,
                       std::uint64_t seed, bool enlargement = false);

// w at a grid time; throws for off-grid times.
double brownian_value(const PathBatch& batch, std::size_t path, double t);

// Batch at a coarser level whose increments are block sums of the input's;
// Brownian values at shared grid times are preserved exactly.
PathBatch coarsen(const PathBatch& batch, int to_level);

// Debug/golden dump: 8-byte header (uint32 level, uint32 count, little
// endian) followed by row-major binary64 increments. The horizon and the
// enlargement column are not stored.
void write_path_dump(const PathBatch& batch, std::ostream& os);
PathBatch read_path_dump(std::istream& is, double horizon);

}  // namespace fintra
