#include <doctest.h>

#include <cmath>
#include <memory>

#include "fintra/oracles.hpp"
#include "fintra/rng.hpp"

using namespace fintra;

namespace {

const ExpectationEngine& exact_engine() {
    static const ExpectationEngine e = ExpectationEngine::exact();
    return e;
}

StepProcess member(std::shared_ptr<const FiniteElementSpace> space,
                   std::uint64_t seed) {
    std::vector<double> coef(space->size());
    double norm = 0.0;
    for (std::size_t a = 0; a < coef.size(); ++a) {
        coef[a] = gaussian_draw(seed, a, 1, RngDomain::increment);
        norm += coef[a] * coef[a];
    }
    for (auto& c : coef) c /= std::sqrt(norm);
    return {std::move(space), std::move(coef)};
}

}  // namespace

TEST_CASE("the registry resolves names and rejects unknown ones") {
    CHECK(benchmark_names().size() == 5);
    for (const auto& name : benchmark_names()) {
        const auto bench = benchmark(name, 2.0);
        CHECK(bench.name == name);
        CHECK(bench.problem.horizon == 2.0);
        CHECK(!bench.description.empty());
        CHECK(!bench.oracle.derivation.empty());
    }
    CHECK_THROWS_AS(benchmark("unknown"), std::out_of_range);
    CHECK_THROWS_AS(benchmark("bm", -1.0), std::invalid_argument);
}

TEST_CASE("closed forms match their terminal data pathwise") {
    for (const auto& name : benchmark_names()) {
        const auto bench = benchmark(name, 1.0);
        const DyadicGrid grid(3, 1.0);
        const PathBatch batch = sample_paths(grid, 64, 11, bench.enlargement);
        for (std::size_t p = 0; p < batch.count(); ++p) {
            const double terminal = bench.problem.terminal.eval(batch, p, 1.0);
            const double y_at_T = bench.oracle.y.eval(batch, p, 1.0);
            CHECK(y_at_T == doctest::Approx(terminal).epsilon(1e-12).scale(1.0));
        }
    }
}

TEST_CASE("spot values of the registered solutions") {
    const auto bm = benchmark("bm", 1.0);
    const DyadicGrid grid(2, 1.0);
    const PathBatch batch = sample_paths(grid, 4, 5);
    CHECK(bm.oracle.z.eval(batch, 1, 0.3) == 1.0);

    const auto cd = benchmark("const_driver", 1.0);
    CHECK(cd.oracle.y.eval(batch, 0, 0.0) == doctest::Approx(-1.0));
    CHECK(cd.oracle.z.eval(batch, 0, 0.5) == 0.0);

    const auto bm2 = benchmark("bm_squared", 1.0);
    const double w = brownian_value(batch, 2, 1.0);
    CHECK(bm2.problem.terminal.eval(batch, 2, 1.0) == doctest::Approx(w * w));
}

TEST_CASE("adapted oracles ignore increments after the evaluation time") {
    const DyadicGrid grid(2, 1.0);
    std::vector<double> inc{0.3, -0.1, 0.8, 0.2};
    const PathBatch before =
        PathBatch::from_increments(grid, inc, std::vector<double>{1.3});
    std::vector<double> tampered = inc;
    tampered[2] = -5.0;
    tampered[3] = 4.0;
    const PathBatch after =
        PathBatch::from_increments(grid, tampered, std::vector<double>{1.3});
    for (const auto& name : benchmark_names()) {
        const auto bench = benchmark(name, 1.0);
        if (bench.enlargement) continue;
        CHECK(bench.oracle.y.eval(before, 0, 0.5) ==
              bench.oracle.y.eval(after, 0, 0.5));
        CHECK(bench.oracle.z.eval(before, 0, 0.5) ==
              bench.oracle.z.eval(after, 0, 0.5));
    }
    const auto enlarged = benchmark("enlarged", 1.0);
    CHECK(enlarged.oracle.y.eval(before, 0, 0.5) ==
          enlarged.oracle.y.eval(after, 0, 0.5));
}

TEST_CASE("every closed form satisfies the variational identity") {
    for (const auto& name : benchmark_names()) {
        const auto bench = benchmark(name, 1.0);
        auto space =
            std::make_shared<FiniteElementSpace>(DyadicGrid(2, 1.0), 2,
                                                 bench.enlargement);
        for (std::uint64_t r = 0; r < 3; ++r) {
            TestTriple triple;
            triple.u = member(space, 300 + r);
            triple.v = member(space, 400 + r);
            if (bench.oracle.y.has_symbolic()) {
                const Expectation defect = closed_form_residual(
                    bench.oracle, triple, bench.problem, exact_engine());
                CHECK(std::abs(defect.value) <= 1e-10);
            }
            // Monte Carlo route, also exercised for the non-polynomial entry.
            auto batch = std::make_shared<PathBatch>(PathBatch::sample(
                DyadicGrid(2, 1.0), 1 << 13, 900 + r, bench.enlargement));
            const auto mc = ExpectationEngine::monte_carlo(batch);
            const Expectation defect =
                closed_form_residual(bench.oracle, triple, bench.problem, mc);
            if (defect.std_error > 0.0) {
                CHECK(std::abs(defect.value) <= 4.0 * defect.std_error);
            } else {
                CHECK(std::abs(defect.value) <= 1e-12);
            }
        }
    }
}

TEST_CASE("direct projection of the constant integrand") {
    const auto bench = benchmark("bm", 1.0);
    const FiniteElementSpace space(DyadicGrid(2, 1.0), 1, false);
    const auto coefs = direct_projection(bench.oracle.z, space, exact_engine());
    // Z = 1: only constants contribute, with value sqrt(T/2^N).
    const double expected = std::sqrt(0.25);
    for (std::size_t flat = 0; flat < space.size(); ++flat) {
        const auto [k, i] = space.locate(flat);
        (void)k;
        if (i == 1) {
            CHECK(coefs[flat].value == doctest::Approx(expected).epsilon(1e-12));
        } else {
            CHECK(std::abs(coefs[flat].value) <= 1e-14);
        }
    }
}

TEST_CASE("direct projection of zero is zero") {
    PathFunctional zero;
    zero.adaptedness = Adaptedness::adapted;
    zero.eval = [](const PathBatch&, std::size_t, double) { return 0.0; };
    zero.symbolic = [](const SymbolicContext&, double) {
        return GaussianPolynomial();
    };
    const FiniteElementSpace space(DyadicGrid(1, 1.0), 2, false);
    for (const auto& c : direct_projection(zero, space, exact_engine())) {
        CHECK(c.value == 0.0);
    }
}

TEST_CASE("direct projection is the identity on trial-space members") {
    auto space = std::make_shared<FiniteElementSpace>(DyadicGrid(2, 1.0), 2, false);

    // A single basis element projects to a unit coefficient.
    std::vector<double> unit(space->size(), 0.0);
    unit[5] = 1.0;
    const StepProcess e{space, unit};
    const auto coefs = direct_projection(to_functional(e), *space, exact_engine());
    for (std::size_t flat = 0; flat < space->size(); ++flat) {
        CHECK(std::abs(coefs[flat].value - (flat == 5 ? 1.0 : 0.0)) <= 1e-12);
    }

    // Projecting an assembled solution returns its own table.
    const auto bench = benchmark("bm_squared", 1.0);
    const auto solution = solve_linear(bench.problem, 2, 2, exact_engine());
    const auto proj_y = direct_projection(to_functional(solution.y_process()),
                                          *solution.space, exact_engine());
    const auto proj_z = direct_projection(to_functional(solution.z_process()),
                                          *solution.space, exact_engine());
    for (std::size_t flat = 0; flat < solution.space->size(); ++flat) {
        CHECK(std::abs(proj_y[flat].value - solution.table.alpha[flat]) <= 1e-10);
        CHECK(std::abs(proj_z[flat].value - solution.table.beta[flat]) <= 1e-10);
    }
}

TEST_CASE("solver coefficients are the projection of the closed form") {
    // Exact-engine route of the projection identity, checked entrywise.
    for (const auto& name : {"bm", "bm_squared", "const_driver"}) {
        const auto bench = benchmark(name, 1.0);
        for (int d : {1, 2}) {
            const auto solution = solve_linear(bench.problem, 2, d, exact_engine());
            const auto proj_y =
                direct_projection(bench.oracle.y, *solution.space, exact_engine());
            const auto proj_z =
                direct_projection(bench.oracle.z, *solution.space, exact_engine());
            for (std::size_t flat = 0; flat < solution.space->size(); ++flat) {
                CHECK(std::abs(solution.table.alpha[flat] - proj_y[flat].value) <=
                      1e-10);
                CHECK(std::abs(solution.table.beta[flat] - proj_z[flat].value) <=
                      1e-10);
            }
        }
    }
}

TEST_CASE("nested Monte Carlo conditioning reproduces known conditionals") {
    const DyadicGrid grid(2, 1.0);

    // Prefix with w(1/2) = 0.4: E[w(1)|F_t] = 0.4.
    const auto bm = benchmark("bm", 1.0);
    const std::vector<double> prefix{0.1, 0.3};
    const Expectation cond = nested_mc_conditional(
        bm.problem.terminal, grid, prefix, std::nullopt, 0.5, 20000, 42);
    CHECK(std::abs(cond.value - 0.4) <= 4.0 * cond.std_error);

    // Deterministic terminal data: exact value, zero spread.
    PathFunctional deterministic;
    deterministic.eval = [](const PathBatch&, std::size_t, double) { return 2.5; };
    const Expectation fixed = nested_mc_conditional(deterministic, grid, prefix,
                                                    std::nullopt, 0.5, 100, 1);
    CHECK(fixed.value == 2.5);
    CHECK(fixed.std_error == 0.0);

    // w(1/2) = 1: E[w(1)^2 | F_{1/2}] = 1 + 1/2.
    const auto bm2 = benchmark("bm_squared", 1.0);
    const std::vector<double> unit_prefix{0.6, 0.4};
    const Expectation squared = nested_mc_conditional(
        bm2.problem.terminal, grid, unit_prefix, std::nullopt, 0.5, 20000, 43);
    CHECK(std::abs(squared.value - 1.5) <= 4.0 * squared.std_error);

    CHECK_THROWS_AS(nested_mc_conditional(bm.problem.terminal, grid, prefix,
                                          std::nullopt, 0.37, 10, 1),
                    std::invalid_argument);
    CHECK_THROWS_AS(nested_mc_conditional(bm.problem.terminal, grid, prefix,
                                          std::nullopt, 0.5, 0, 1),
                    std::invalid_argument);
}

TEST_CASE("closed forms agree with nested Monte Carlo conditioning") {
    // The anti-hallucination check: y(t, path) must match the brute-force
    // conditional expectation of the terminal data, benchmark by benchmark.
    const DyadicGrid grid(2, 1.0);
    const PathBatch outer = sample_paths(grid, 3, 123, true);
    const double t = 0.5;
    for (const auto& name : benchmark_names()) {
        const auto bench = benchmark(name, 1.0);
        // The conditional expectation of y_T equals y(t) only without a
        // driver; skip benchmarks whose solution carries an integral term.
        if (bench.problem.driver) continue;
        for (std::size_t p = 0; p < outer.count(); ++p) {
            const auto inc = outer.increments(p);
            const std::optional<double> xi =
                bench.enlargement ? std::optional<double>(outer.enlargement_value(p))
                                  : std::nullopt;
            const Expectation cond = nested_mc_conditional(
                bench.problem.terminal, grid, {inc.data(), inc.size()}, xi, t,
                40000, mix_seed(17, p));
            const double want = bench.oracle.y.eval(outer, p, t);
            if (cond.std_error > 0.0) {
                CHECK(std::abs(cond.value - want) <= 4.0 * cond.std_error);
            } else {
                CHECK(cond.value == doctest::Approx(want).epsilon(1e-12));
            }
        }
    }
}
