#include "fintra/time_grid.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace fintra {

namespace {
constexpr int kMaxLevel = 30;
}

DyadicGrid::DyadicGrid(int level, double horizon)
    : level_(level), horizon_(horizon) {
    if (level < 0) {
        throw std::invalid_argument("DyadicGrid: level must be >= 0, got " +
                                    std::to_string(level));
    }
    if (level > kMaxLevel) {
        throw std::invalid_argument("DyadicGrid: level " + std::to_string(level) +
                                    " exceeds supported maximum " +
                                    std::to_string(kMaxLevel));
    }
    if (!(horizon > 0.0) || !std::isfinite(horizon)) {
        throw std::invalid_argument("DyadicGrid: horizon must be positive and finite");
    }
    block_count_ = std::size_t{1} << level;
    block_width_ = std::ldexp(horizon, -level);
}

double DyadicGrid::time(std::size_t l) const {
    if (l > block_count_) {
        throw std::invalid_argument("DyadicGrid::time: index out of range");
    }
    // l * T rounds once; the 2^-N scaling is exact.
    return std::ldexp(static_cast<double>(l) * horizon_, -level_);
}

std::vector<double> DyadicGrid::times() const {
    std::vector<double> out(block_count_ + 1);
    for (std::size_t l = 0; l <= block_count_; ++l) out[l] = time(l);
    return out;
}

std::size_t DyadicGrid::block_index(double t) const {
    if (!(t >= 0.0) || !(t <= horizon_)) {
        throw std::invalid_argument("DyadicGrid::block_index: time outside [0, T]");
    }
    double idx = std::floor(t / block_width_);
    std::size_t k = idx <= 0.0 ? 0
                               : std::min(static_cast<std::size_t>(idx),
                                          block_count_ - 1);
    // floor(t / width) can be off by one ulp; settle against exact grid times.
    while (k > 0 && t < time(k)) --k;
    while (k + 1 < block_count_ && t >= time(k + 1)) ++k;
    return k;
}

double DyadicGrid::clip_weight(std::size_t k, double tau) const {
    if (k >= block_count_) {
        throw std::invalid_argument("DyadicGrid::clip_weight: block index out of range");
    }
    if (!(tau >= 0.0) || !(tau <= horizon_)) {
        throw std::invalid_argument("DyadicGrid::clip_weight: tau outside [0, T]");
    }
    return std::min(tau, time(k + 1)) - std::min(tau, time(k));
}

DyadicGrid build_grid(int level, double horizon) { return DyadicGrid(level, horizon); }

DyadicGrid refine(const DyadicGrid& grid) {
    return DyadicGrid(grid.level() + 1, grid.horizon());
}

}  // namespace fintra
