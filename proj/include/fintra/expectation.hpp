#pragma once

#include <functional>
#include <memory>
#include <span>
#include <stdexcept>

#include "fintra/basis.hpp"
#include "fintra/gaussian_poly.hpp"
#include "fintra/sampling.hpp"
#include "fintra/time_grid.hpp"

namespace fintra {

struct Expectation {
    double value = 0.0;
    double std_error = 0.0;
};

// Raised when the exact engine meets data without a polynomial form.
struct unsupported_data_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Deterministic pairwise (binary tree) reduction in index order.
double pairwise_sum(std::span<const double> values);

// Sample mean and standard error of pathwise values. Identical inputs
// report a standard error of exactly zero. Non-finite entries raise
// std::domain_error naming the offending path.
Expectation mc_expect(std::span<const double> pathwise_values);
Expectation mc_expect(const PathBatch& batch,
                      const std::function<double(std::size_t)>& pathwise);

/**
 * One of the two interchangeable ways to evaluate every expectation of the
 * method: averaging over a Monte Carlo path batch, or exact Gaussian-moment
 * algebra on polynomial data. The exact variant reports zero uncertainty.
 */
class ExpectationEngine {
public:
    static ExpectationEngine exact() { return ExpectationEngine(nullptr); }
    static ExpectationEngine monte_carlo(std::shared_ptr<const PathBatch> batch) {
        if (!batch) throw std::invalid_argument("monte_carlo engine needs a batch");
        return ExpectationEngine(std::move(batch));
    }

    bool is_exact() const { return batch_ == nullptr; }
    const PathBatch& batch() const {
        if (!batch_) throw std::logic_error("exact engine has no path batch");
        return *batch_;
    }
    std::shared_ptr<const PathBatch> batch_ptr() const { return batch_; }

    Expectation expect(const GaussianPolynomial& p) const;

private:
    explicit ExpectationEngine(std::shared_ptr<const PathBatch> batch)
        : batch_(std::move(batch)) {}

    std::shared_ptr<const PathBatch> batch_;
};

// Coordinate ids used by symbolic data on a given grid: nonnegative ids are
// the grid's normalized increments.
struct SymbolicContext {
    DyadicGrid grid;
    bool enlargement = false;

    GaussianPolynomial increment(std::size_t j) const;

    // w(t) as a polynomial. At a grid time this is a combination of the
    // increments before t; strictly inside a block the remainder is carried
    // by the reserved bridge coordinate, which is only sound against
    // factors measurable before that block (see GaussianPolynomial).
    GaussianPolynomial brownian(double t) const;

    GaussianPolynomial enlargement_coordinate() const;
};

// Monomial coefficients of He_n, constant term first.
std::vector<double> hermite_coefficients(int n);

// Monomial expansion of c * prod_j He_{m_j}; agrees with eval_h pathwise.
GaussianPolynomial chaos_to_poly(const ChaosBasisFunction& h);

// Evaluates a polynomial on one path of a batch: nonnegative coordinates
// resolve to normalized increments at `level`, kEnlargement to the batch's
// enlargement column. Bridge coordinates cannot be evaluated pathwise.
double eval_poly_on_path(const GaussianPolynomial& p, const PathBatch& batch,
                         std::size_t path, int level);

}  // namespace fintra
