#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

#include "fintra/basis.hpp"
#include "fintra/expectation.hpp"
#include "fintra/problem.hpp"

namespace fintra {

/**
 * Both coefficient families of the numerical pair over one trial space, in
 * canonical flat element order: alpha expands the y component, beta the Z
 * component. Standard errors are zero under the exact engine.
 */
struct CoefficientTable {
    int level = 0;
    int degree = 0;
    bool enlargement = false;
    std::vector<double> alpha;
    std::vector<double> beta;
    std::vector<double> alpha_std_error;
    std::vector<double> beta_std_error;
};

// An element of the trial space: coefficients against the canonical basis.
struct StepProcess {
    std::shared_ptr<const FiniteElementSpace> space;
    std::vector<double> coef;

    double value(const PathBatch& batch, std::size_t path, double t) const;
    double value_at_block(const PathBatch& batch, std::size_t path,
                          std::size_t block) const;
    GaussianPolynomial block_poly(std::size_t block) const;
    double l2_norm() const;  // orthonormal basis: sqrt(sum coef^2)
};

/**
 * The numerical solution pair: two step processes over one space, constant
 * on each grid block, block-k values measurable at the block's left
 * endpoint. y is the solution component, z the martingale integrand.
 */
struct StepProcessSolution {
    std::shared_ptr<const FiniteElementSpace> space;
    CoefficientTable table;

    double y(const PathBatch& batch, std::size_t path, double t) const;
    double z(const PathBatch& batch, std::size_t path, double t) const;
    StepProcess y_process() const;
    StepProcess z_process() const;
};

// Forward test data of the variational identity: z(tau) = eta +
// int_t^tau u ds + int_t^tau v dw with u, v simple processes and eta
// measurable at the start time. A missing eta means zero.
struct TestTriple {
    StepProcess u;
    StepProcess v;
    std::optional<PathFunctional> eta;
    double start_time = 0.0;
};

std::vector<Expectation> compute_alpha(const BSDEProblem& problem,
                                       const FiniteElementSpace& space,
                                       const ExpectationEngine& engine,
                                       int threads = 1);

std::vector<Expectation> compute_beta(const BSDEProblem& problem,
                                      const FiniteElementSpace& space,
                                      const ExpectationEngine& engine,
                                      int threads = 1);

CoefficientTable make_table(const FiniteElementSpace& space,
                            const std::vector<Expectation>& alphas,
                            const std::vector<Expectation>& betas);

StepProcessSolution assemble_solution(std::shared_ptr<const FiniteElementSpace> space,
                                      CoefficientTable table);

StepProcessSolution solve_linear(const BSDEProblem& problem, int level, int degree,
                                 const ExpectationEngine& engine,
                                 bool enlargement = false, int threads = 1);

// Signed defect of the variational identity with the numerical pair in
// place of the solution: E<z(T), y_T> - E<eta, y(t)> - E int <z, f>
// - E int <u, y> - E int <v, Z>. Time integrals freeze the integrand at
// block left endpoints except the drift part of z, which is integrated in
// closed form; this matches the coefficient quadrature exactly.
double variational_residual(const StepProcessSolution& solution,
                            const TestTriple& triple, const BSDEProblem& problem,
                            const ExpectationEngine& engine);

struct PicardResult {
    StepProcessSolution solution;
    int iterations = 0;
    bool converged = false;
};

// Fixed-point iteration for Lipschitz drivers: each round solves the linear
// problem with the driver frozen at the previous iterate, starting from the
// zero pair, until the L^2(Omega x [0,T]) change of both components is at
// most tol. Needs a Monte Carlo engine.
PicardResult solve_nonlinear_picard(const BSDEProblem& problem, int level,
                                    int degree, const ExpectationEngine& engine,
                                    int max_iter, double tol, int threads = 1);

// CSV serialization: header k,i,alpha,beta,alpha_stderr,beta_stderr with
// rows in canonical element order.
void write_coefficient_csv(const CoefficientTable& table,
                           const FiniteElementSpace& space, std::ostream& os);

}  // namespace fintra
