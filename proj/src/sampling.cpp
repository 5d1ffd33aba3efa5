#include "fintra/sampling.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

#include "fintra/rng.hpp"

namespace fintra {

PathBatch::PathBatch(DyadicGrid grid, std::size_t count, std::uint64_t seed,
                     std::vector<double> increments,
                     std::optional<std::vector<double>> enlargement_values)
    : grid_(grid),
      count_(count),
      seed_(seed),
      increments_(std::move(increments)),
      enlargement_values_(std::move(enlargement_values)) {}

PathBatch PathBatch::sample(const DyadicGrid& grid, std::size_t count,
                            std::uint64_t seed, bool enlargement) {
    if (count == 0) {
        throw std::invalid_argument("PathBatch::sample: count must be >= 1");
    }
    const std::size_t blocks = grid.block_count();
    const double sqrt_delta = std::sqrt(grid.block_width());
    std::vector<double> inc(count * blocks);
    for (std::size_t p = 0; p < count; ++p) {
        double* row = inc.data() + p * blocks;
        for (std::size_t j = 0; j < blocks; ++j) {
            row[j] = sqrt_delta * gaussian_draw(seed, p, static_cast<std::uint32_t>(j),
                                                RngDomain::increment);
        }
    }
    std::optional<std::vector<double>> xi;
    if (enlargement) {
        xi.emplace(count);
        for (std::size_t p = 0; p < count; ++p) {
            (*xi)[p] = gaussian_draw(seed, p, 0, RngDomain::enlargement);
        }
    }
    return PathBatch(grid, count, seed, std::move(inc), std::move(xi));
}

PathBatch PathBatch::from_increments(const DyadicGrid& grid,
                                     std::vector<double> increments,
                                     std::optional<std::vector<double>> enlargement_values,
                                     std::uint64_t seed) {
    const std::size_t blocks = grid.block_count();
    if (blocks == 0 || increments.size() % blocks != 0 || increments.empty()) {
        throw std::invalid_argument(
            "PathBatch::from_increments: size must be a positive multiple of 2^N");
    }
    const std::size_t count = increments.size() / blocks;
    if (enlargement_values && enlargement_values->size() != count) {
        throw std::invalid_argument(
            "PathBatch::from_increments: enlargement column length mismatch");
    }
    return PathBatch(grid, count, seed, std::move(increments),
                     std::move(enlargement_values));
}

std::span<const double> PathBatch::increments(std::size_t path) const {
    if (path >= count_) {
        throw std::invalid_argument("PathBatch: path index out of range");
    }
    return {increments_.data() + path * grid_.block_count(), grid_.block_count()};
}

double PathBatch::increment(std::size_t path, std::size_t j) const {
    if (path >= count_ || j >= grid_.block_count()) {
        throw std::invalid_argument("PathBatch: increment index out of range");
    }
    return increments_[path * grid_.block_count() + j];
}

double PathBatch::normalized(std::size_t path, std::size_t j) const {
    return increment(path, j) / std::sqrt(grid_.block_width());
}

double PathBatch::enlargement_value(std::size_t path) const {
    if (!enlargement_values_) {
        throw std::invalid_argument("PathBatch: no enlargement column in this batch");
    }
    if (path >= count_) {
        throw std::invalid_argument("PathBatch: path index out of range");
    }
    return (*enlargement_values_)[path];
}

double PathBatch::brownian(std::size_t path, std::size_t l) const {
    if (path >= count_ || l > grid_.block_count()) {
        throw std::invalid_argument("PathBatch::brownian: index out of range");
    }
    const double* row = increments_.data() + path * grid_.block_count();
    double w = 0.0;
    for (std::size_t j = 0; j < l; ++j) w += row[j];
    return w;
}

void PathBatch::fill_normalized_at_level(std::size_t path, int level,
                                         std::vector<double>& out) const {
    if (level > grid_.level()) {
        throw std::invalid_argument(
            "PathBatch::fill_normalized_at_level: requested level is finer than batch");
    }
    const std::size_t coarse_blocks = std::size_t{1} << level;
    const std::size_t stride = std::size_t{1} << (grid_.level() - level);
    const double inv_sqrt_delta =
        1.0 / std::sqrt(std::ldexp(grid_.horizon(), -level));
    const double* row = increments_.data() + path * grid_.block_count();
    out.resize(coarse_blocks);
    for (std::size_t k = 0; k < coarse_blocks; ++k) {
        double sum = 0.0;
        for (std::size_t j = 0; j < stride; ++j) sum += row[k * stride + j];
        out[k] = sum * inv_sqrt_delta;
    }
}

PathBatch sample_paths(const DyadicGrid& grid, std::size_t count,
                       std::uint64_t seed, bool enlargement) {
    return PathBatch::sample(grid, count, seed, enlargement);
}

double brownian_value(const PathBatch& batch, std::size_t path, double t) {
    const DyadicGrid& grid = batch.grid();
    if (!(t >= 0.0) || !(t <= grid.horizon())) {
        throw std::invalid_argument("brownian_value: time outside [0, T]");
    }
    const double idx = t / grid.block_width();
    const double rounded = std::round(idx);
    std::size_t l = static_cast<std::size_t>(rounded);
    if (l > grid.block_count() || grid.time(l) != t) {
        throw std::invalid_argument("brownian_value: " + std::to_string(t) +
                                    " is not a grid time");
    }
    return batch.brownian(path, l);
}

PathBatch coarsen(const PathBatch& batch, int to_level) {
    const DyadicGrid& fine = batch.grid();
    if (to_level > fine.level()) {
        throw std::invalid_argument("coarsen: target level exceeds batch level");
    }
    if (to_level == fine.level()) return batch;
    const DyadicGrid coarse(to_level, fine.horizon());
    const std::size_t stride = std::size_t{1} << (fine.level() - to_level);
    std::vector<double> inc(batch.count() * coarse.block_count());
    for (std::size_t p = 0; p < batch.count(); ++p) {
        const std::span<const double> row = batch.increments(p);
        for (std::size_t k = 0; k < coarse.block_count(); ++k) {
            double sum = 0.0;
            for (std::size_t j = 0; j < stride; ++j) sum += row[k * stride + j];
            inc[p * coarse.block_count() + k] = sum;
        }
    }
    std::optional<std::vector<double>> xi;
    if (batch.has_enlargement()) {
        xi.emplace(batch.count());
        for (std::size_t p = 0; p < batch.count(); ++p) {
            (*xi)[p] = batch.enlargement_value(p);
        }
    }
    return PathBatch::from_increments(coarse, std::move(inc), std::move(xi),
                                      batch.seed());
}

void write_path_dump(const PathBatch& batch, std::ostream& os) {
    const std::uint32_t level = static_cast<std::uint32_t>(batch.grid().level());
    const std::uint32_t count = static_cast<std::uint32_t>(batch.count());
    char header[8];
    std::memcpy(header, &level, 4);
    std::memcpy(header + 4, &count, 4);
    os.write(header, 8);
    for (std::size_t p = 0; p < batch.count(); ++p) {
        const auto row = batch.increments(p);
        os.write(reinterpret_cast<const char*>(row.data()),
                 static_cast<std::streamsize>(row.size() * sizeof(double)));
    }
}

PathBatch read_path_dump(std::istream& is, double horizon) {
    char header[8];
    is.read(header, 8);
    if (!is) throw std::invalid_argument("read_path_dump: truncated header");
    std::uint32_t level = 0;
    std::uint32_t count = 0;
    std::memcpy(&level, header, 4);
    std::memcpy(&count, header + 4, 4);
    const DyadicGrid grid(static_cast<int>(level), horizon);
    std::vector<double> inc(static_cast<std::size_t>(count) * grid.block_count());
    is.read(reinterpret_cast<char*>(inc.data()),
            static_cast<std::streamsize>(inc.size() * sizeof(double)));
    if (!is) throw std::invalid_argument("read_path_dump: truncated payload");
    return PathBatch::from_increments(grid, std::move(inc), std::nullopt);
}

}  // namespace fintra
