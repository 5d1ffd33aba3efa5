#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fintra/expectation.hpp"
#include "fintra/problem.hpp"
#include "fintra/solver.hpp"

namespace fintra {

// Exact solution pair of a benchmark problem, available pathwise and (for
// polynomial data) symbolically. Derivations live in docs/oracles.md and are
// cross-checked against nested Monte Carlo conditioning in the test suite.
struct ClosedFormSolution {
    PathFunctional y;
    PathFunctional z;
    std::string derivation;
};

struct BenchmarkCase {
    std::string name;
    std::string description;
    bool enlargement = false;
    BSDEProblem problem;
    ClosedFormSolution oracle;
};

// Registry: bm, bm_squared, geometric, const_driver, enlarged. Throws
// std::out_of_range for unknown names.
BenchmarkCase benchmark(const std::string& name, double horizon = 1.0);
std::vector<std::string> benchmark_names();

// Orthonormal-expansion coefficients E int <process, e_ki> dtau of an
// adapted process. The exact engine integrates each block with a
// Gauss-Legendre rule (oracle integrands are polynomial in tau), the Monte
// Carlo engine with the trapezoid on the batch grid; both are exact for
// every registered closed form, unlike the solver's left-endpoint driver
// quadrature which is forced by adaptedness.
std::vector<Expectation> direct_projection(const PathFunctional& process,
                                           const FiniteElementSpace& space,
                                           const ExpectationEngine& engine,
                                           int threads = 1);

// Wraps a trial-space member as an adapted functional (constant on blocks).
PathFunctional to_functional(const StepProcess& process);

// Brute-force conditional expectation E[y_T | F_t]: freezes the first
// increments of a path and averages y_T over fresh continuations drawn from
// a sub-seed.
Expectation nested_mc_conditional(const PathFunctional& terminal,
                                  const DyadicGrid& grid,
                                  std::span<const double> prefix_increments,
                                  std::optional<double> enlargement_value,
                                  double t, std::size_t inner_samples,
                                  std::uint64_t seed);

// Variational defect of the closed-form pair itself against a test triple;
// zero for exact solutions up to quadrature and sampling error. The oracle
// processes are evaluated at both block endpoints (trapezoid / Gauss rules),
// which the solver cannot do for drivers without breaking adaptedness.
Expectation closed_form_residual(const ClosedFormSolution& oracle,
                                 const TestTriple& triple,
                                 const BSDEProblem& problem,
                                 const ExpectationEngine& engine);

}  // namespace fintra
