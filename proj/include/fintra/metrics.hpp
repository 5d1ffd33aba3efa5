#pragma once

#include <utility>
#include <vector>

#include "fintra/oracles.hpp"
#include "fintra/solver.hpp"

namespace fintra {

// Squared L^2(Omega x [0,T]) distances between the numerical pair and a
// closed form, reported per component with sampling uncertainty.
struct ErrorEstimate {
    double y_error2 = 0.0;
    double y_std_error = 0.0;
    double z_error2 = 0.0;
    double z_std_error = 0.0;
};

// Monte Carlo estimate on a batch at the solution's level or finer; the
// time integral uses left-endpoint quadrature of the squared difference on
// the batch grid.
ErrorEstimate l2_error(const StepProcessSolution& solution,
                       const ClosedFormSolution& oracle, const PathBatch& batch,
                       int threads = 1);

// Exact route for polynomial closed forms: Gaussian moments with a
// Gauss-Legendre time rule per block.
ErrorEstimate l2_error_exact(const StepProcessSolution& solution,
                             const ClosedFormSolution& oracle, int threads = 1);

// E[ sup over batch grid times of |y_N(t) - y(t)|^2 ], the y component's
// path-uniform seminorm sampled on the grid.
Expectation sup_error(const StepProcessSolution& solution,
                      const ClosedFormSolution& oracle, const PathBatch& batch,
                      int threads = 1);

// Least-squares slope of log2(error^2) against the level N; needs at least
// three points.
double rate_fit(const std::vector<std::pair<int, double>>& level_error2);

}  // namespace fintra
