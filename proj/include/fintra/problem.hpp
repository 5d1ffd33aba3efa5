#pragma once

#include <functional>
#include <optional>

#include "fintra/expectation.hpp"
#include "fintra/sampling.hpp"

namespace fintra {

enum class Adaptedness {
    adapted,   // value at t depends only on information up to t
    terminal,  // F_T-measurable, evaluated at t = T
};

// A random functional of a Brownian path, available pathwise and, when the
// data is polynomial in the Gaussian coordinates, symbolically for the
// exact engine.
struct PathFunctional {
    Adaptedness adaptedness = Adaptedness::terminal;
    std::function<double(const PathBatch&, std::size_t path, double t)> eval;
    std::function<GaussianPolynomial(const SymbolicContext&, double t)> symbolic;

    bool has_symbolic() const { return static_cast<bool>(symbolic); }
};

// f(t, y, z) with a declared Lipschitz constant in (y, z).
struct LipschitzDriver {
    std::function<double(double t, double y, double z)> f;
    double lipschitz_constant = 0.0;
};

/**
 * Terminal-value problem dy = f dt + Z dw on [0, T], y(T) = y_T, scalar
 * valued (vector problems with a one-dimensional Brownian motion decouple
 * componentwise). The driver is either a linear (state-independent) adapted
 * process or a Lipschitz rule handled by Picard iteration.
 */
struct BSDEProblem {
    int dimension = 1;
    double horizon = 1.0;
    PathFunctional terminal;
    std::optional<PathFunctional> driver;        // linear f(t)
    std::optional<LipschitzDriver> lipschitz;    // nonlinear f(t, y, z)

    bool is_linear() const { return !lipschitz.has_value(); }
};

void validate_problem(const BSDEProblem& problem);

}  // namespace fintra
