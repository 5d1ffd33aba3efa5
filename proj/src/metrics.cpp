#include "fintra/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "fintra/parallel.hpp"

namespace fintra {

namespace {

struct BlockValues {
    std::vector<double> y;  // y_N on each coarse block, one path
    std::vector<double> z;
};

void block_values_for_path(const StepProcessSolution& solution,
                           const PathBatch& batch, std::size_t path,
                           std::vector<double>& coords, BlockValues& out) {
    const FiniteElementSpace& space = *solution.space;
    batch.fill_normalized_at_level(path, space.grid().level(), coords);
    PathCoords pc{coords, std::nullopt};
    if (space.enlargement()) pc.enlargement = batch.enlargement_value(path);
    const std::size_t blocks = space.grid().block_count();
    out.y.assign(blocks, 0.0);
    out.z.assign(blocks, 0.0);
    for (std::size_t k = 0; k < blocks; ++k) {
        const std::size_t lo = space.block_begin(k);
        const std::size_t hi = lo + space.block_size(k);
        double y = 0.0;
        double z = 0.0;
        for (std::size_t flat = lo; flat < hi; ++flat) {
            const double hv = eval_h(space.element(flat).h, pc);
            y += solution.table.alpha[flat] * hv;
            z += solution.table.beta[flat] * hv;
        }
        out.y[k] = y;
        out.z[k] = z;
    }
}

void check_batch(const StepProcessSolution& solution, const PathBatch& batch) {
    const DyadicGrid& grid = solution.space->grid();
    if (batch.grid().horizon() != grid.horizon() ||
        batch.grid().level() < grid.level()) {
        throw std::invalid_argument(
            "metrics: batch must be at the solution's level or finer over the "
            "same horizon");
    }
    if (solution.space->enlargement() && !batch.has_enlargement()) {
        throw std::invalid_argument("metrics: batch lacks the enlargement column");
    }
}

}  // namespace

ErrorEstimate l2_error(const StepProcessSolution& solution,
                       const ClosedFormSolution& oracle, const PathBatch& batch,
                       int threads) {
    check_batch(solution, batch);
    const DyadicGrid& fine = batch.grid();
    const DyadicGrid& coarse = solution.space->grid();
    const std::size_t stride = fine.block_count() / coarse.block_count();
    const double fine_delta = fine.block_width();
    const std::size_t S = batch.count();

    std::vector<double> y_sq(S), z_sq(S);
    parallel_for(S, threads, [&](std::size_t p) {
        std::vector<double> coords;
        BlockValues blocks;
        block_values_for_path(solution, batch, p, coords, blocks);
        double y_acc = 0.0;
        double z_acc = 0.0;
        for (std::size_t l = 0; l < fine.block_count(); ++l) {
            const double t = fine.time(l);
            const std::size_t k = l / stride;
            const double dy = blocks.y[k] - oracle.y.eval(batch, p, t);
            const double dz = blocks.z[k] - oracle.z.eval(batch, p, t);
            y_acc += fine_delta * dy * dy;
            z_acc += fine_delta * dz * dz;
        }
        y_sq[p] = y_acc;
        z_sq[p] = z_acc;
    });
    const Expectation ye = mc_expect(y_sq);
    const Expectation ze = mc_expect(z_sq);
    return {ye.value, ye.std_error, ze.value, ze.std_error};
}

ErrorEstimate l2_error_exact(const StepProcessSolution& solution,
                             const ClosedFormSolution& oracle, int threads) {
    if (!oracle.y.has_symbolic() || !oracle.z.has_symbolic()) {
        throw unsupported_data_error(
            "exact engine: closed form has no polynomial form");
    }
    const FiniteElementSpace& space = *solution.space;
    const DyadicGrid& grid = space.grid();
    const SymbolicContext ctx{grid, space.enlargement()};
    const double delta = grid.block_width();

    // 5-point Gauss-Legendre per block, as in direct_projection.
    const double a = std::sqrt(5.0 - 2.0 * std::sqrt(10.0 / 7.0)) / 3.0;
    const double b = std::sqrt(5.0 + 2.0 * std::sqrt(10.0 / 7.0)) / 3.0;
    const double wa = (322.0 + 13.0 * std::sqrt(70.0)) / 900.0;
    const double wb = (322.0 - 13.0 * std::sqrt(70.0)) / 900.0;
    const std::array<double, 5> nodes{-b, -a, 0.0, a, b};
    const std::array<double, 5> weights{wb, wa, 128.0 / 225.0, wa, wb};

    std::vector<double> y_block(grid.block_count(), 0.0);
    std::vector<double> z_block(grid.block_count(), 0.0);
    parallel_for(grid.block_count(), threads, [&](std::size_t k) {
        const GaussianPolynomial y_poly = solution.y_process().block_poly(k);
        const GaussianPolynomial z_poly = solution.z_process().block_poly(k);
        const double t_k = grid.time(k);
        double y_acc = 0.0;
        double z_acc = 0.0;
        for (int n = 0; n < 5; ++n) {
            const double tau = t_k + 0.5 * delta * (nodes[n] + 1.0);
            const GaussianPolynomial dy = y_poly - oracle.y.symbolic(ctx, tau);
            const GaussianPolynomial dz = z_poly - oracle.z.symbolic(ctx, tau);
            y_acc += weights[n] * expect_product(dy, dy);
            z_acc += weights[n] * expect_product(dz, dz);
        }
        y_block[k] = 0.5 * delta * y_acc;
        z_block[k] = 0.5 * delta * z_acc;
    });
    ErrorEstimate out;
    for (std::size_t k = 0; k < grid.block_count(); ++k) {
        out.y_error2 += y_block[k];
        out.z_error2 += z_block[k];
    }
    return out;
}

Expectation sup_error(const StepProcessSolution& solution,
                      const ClosedFormSolution& oracle, const PathBatch& batch,
                      int threads) {
    check_batch(solution, batch);
    const DyadicGrid& fine = batch.grid();
    const DyadicGrid& coarse = solution.space->grid();
    const std::size_t stride = fine.block_count() / coarse.block_count();
    const std::size_t S = batch.count();

    std::vector<double> sup(S);
    parallel_for(S, threads, [&](std::size_t p) {
        std::vector<double> coords;
        BlockValues blocks;
        block_values_for_path(solution, batch, p, coords, blocks);
        double worst = 0.0;
        for (std::size_t l = 0; l <= fine.block_count(); ++l) {
            const double t = fine.time(l);
            const std::size_t k =
                std::min(l / stride, coarse.block_count() - 1);  // t = T: last block
            const double dy = blocks.y[k] - oracle.y.eval(batch, p, t);
            worst = std::max(worst, dy * dy);
        }
        sup[p] = worst;
    });
    return mc_expect(sup);
}

double rate_fit(const std::vector<std::pair<int, double>>& level_error2) {
    if (level_error2.size() < 3) {
        throw std::invalid_argument("rate_fit: need at least 3 levels");
    }
    double sx = 0.0, sy = 0.0, sxx = 0.0, sxy = 0.0;
    for (const auto& [level, err2] : level_error2) {
        if (!(err2 > 0.0)) {
            throw std::invalid_argument("rate_fit: squared errors must be positive");
        }
        const double x = static_cast<double>(level);
        const double y = std::log2(err2);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    const double n = static_cast<double>(level_error2.size());
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace fintra
