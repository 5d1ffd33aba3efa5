#include "fintra/oracles.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "fintra/parallel.hpp"
#include "fintra/rng.hpp"

namespace fintra {

namespace {

// 5-point Gauss-Legendre rule on [-1, 1]; exact through degree 9. The block
// integrands of every registered oracle are low-degree polynomials in tau.
struct GaussLegendre5 {
    std::array<double, 5> node;
    std::array<double, 5> weight;
    GaussLegendre5() {
        const double a = std::sqrt(5.0 - 2.0 * std::sqrt(10.0 / 7.0)) / 3.0;
        const double b = std::sqrt(5.0 + 2.0 * std::sqrt(10.0 / 7.0)) / 3.0;
        const double wa = (322.0 + 13.0 * std::sqrt(70.0)) / 900.0;
        const double wb = (322.0 - 13.0 * std::sqrt(70.0)) / 900.0;
        node = {-b, -a, 0.0, a, b};
        weight = {wb, wa, 128.0 / 225.0, wa, wb};
    }
};

const GaussLegendre5& gauss5() {
    static const GaussLegendre5 rule;
    return rule;
}

double terminal_brownian(const PathBatch& batch, std::size_t path) {
    return batch.brownian(path, batch.grid().block_count());
}

PathFunctional constant_functional(double c) {
    PathFunctional f;
    f.adaptedness = Adaptedness::adapted;
    f.eval = [c](const PathBatch&, std::size_t, double) { return c; };
    f.symbolic = [c](const SymbolicContext&, double) {
        return GaussianPolynomial::constant(c);
    };
    return f;
}

BenchmarkCase make_bm(double T) {
    BenchmarkCase c;
    c.name = "bm";
    c.description = "terminal value w(T); solution pair (w(t), 1)";
    c.problem.horizon = T;
    c.problem.terminal.adaptedness = Adaptedness::terminal;
    c.problem.terminal.eval = [](const PathBatch& b, std::size_t p, double) {
        return terminal_brownian(b, p);
    };
    c.problem.terminal.symbolic = [](const SymbolicContext& ctx, double) {
        return ctx.brownian(ctx.grid.horizon());
    };
    c.oracle.y.adaptedness = Adaptedness::adapted;
    c.oracle.y.eval = [](const PathBatch& b, std::size_t p, double t) {
        return brownian_value(b, p, t);
    };
    c.oracle.y.symbolic = [](const SymbolicContext& ctx, double t) {
        return ctx.brownian(t);
    };
    c.oracle.z = constant_functional(1.0);
    c.oracle.derivation =
        "y(t) = E[w(T)|F_t] = w(t); dy = 1 dw, so z = 1.";
    return c;
}

BenchmarkCase make_bm_squared(double T) {
    BenchmarkCase c;
    c.name = "bm_squared";
    c.description = "terminal value w(T)^2; solution pair (w(t)^2 + T - t, 2w(t))";
    c.problem.horizon = T;
    c.problem.terminal.adaptedness = Adaptedness::terminal;
    c.problem.terminal.eval = [](const PathBatch& b, std::size_t p, double) {
        const double w = terminal_brownian(b, p);
        return w * w;
    };
    c.problem.terminal.symbolic = [](const SymbolicContext& ctx, double) {
        const auto w = ctx.brownian(ctx.grid.horizon());
        return poly_mul(w, w);
    };
    c.oracle.y.adaptedness = Adaptedness::adapted;
    c.oracle.y.eval = [T](const PathBatch& b, std::size_t p, double t) {
        const double w = brownian_value(b, p, t);
        return w * w + (T - t);
    };
    c.oracle.y.symbolic = [T](const SymbolicContext& ctx, double t) {
        const auto w = ctx.brownian(t);
        return poly_mul(w, w) + GaussianPolynomial::constant(T - t);
    };
    c.oracle.z.adaptedness = Adaptedness::adapted;
    c.oracle.z.eval = [](const PathBatch& b, std::size_t p, double t) {
        return 2.0 * brownian_value(b, p, t);
    };
    c.oracle.z.symbolic = [](const SymbolicContext& ctx, double t) {
        return 2.0 * ctx.brownian(t);
    };
    c.oracle.derivation =
        "Ito on w(t)^2: d(w^2) = 2w dw + dt, so w(t)^2 + (T - t) = "
        "E[w(T)^2|F_t] and z = 2w(t).";
    return c;
}

BenchmarkCase make_geometric(double T) {
    BenchmarkCase c;
    c.name = "geometric";
    c.description =
        "terminal value exp(w(T) - T/2); solution y = exp(w(t) - t/2), z = y "
        "(Monte Carlo only)";
    c.problem.horizon = T;
    c.problem.terminal.adaptedness = Adaptedness::terminal;
    c.problem.terminal.eval = [T](const PathBatch& b, std::size_t p, double) {
        return std::exp(terminal_brownian(b, p) - 0.5 * T);
    };
    c.oracle.y.adaptedness = Adaptedness::adapted;
    c.oracle.y.eval = [](const PathBatch& b, std::size_t p, double t) {
        return std::exp(brownian_value(b, p, t) - 0.5 * t);
    };
    c.oracle.z = c.oracle.y;
    c.oracle.derivation =
        "exp(w(t) - t/2) is the exponential martingale: dE = E dw, so z = y.";
    return c;
}

BenchmarkCase make_const_driver(double T) {
    BenchmarkCase c;
    c.name = "const_driver";
    c.description = "zero terminal value, driver f = 1; y(t) = -(T - t), z = 0";
    c.problem.horizon = T;
    c.problem.terminal.adaptedness = Adaptedness::terminal;
    c.problem.terminal.eval = [](const PathBatch&, std::size_t, double) { return 0.0; };
    c.problem.terminal.symbolic = [](const SymbolicContext&, double) {
        return GaussianPolynomial();
    };
    c.problem.driver = constant_functional(1.0);
    c.oracle.y.adaptedness = Adaptedness::adapted;
    c.oracle.y.eval = [T](const PathBatch&, std::size_t, double t) { return -(T - t); };
    c.oracle.y.symbolic = [T](const SymbolicContext&, double t) {
        return GaussianPolynomial::constant(-(T - t));
    };
    c.oracle.z = constant_functional(0.0);
    c.oracle.derivation =
        "y(t) = E[y_T - int_t^T f ds | F_t] = -(T - t), deterministic, z = 0.";
    return c;
}

BenchmarkCase make_enlarged(double T) {
    BenchmarkCase c;
    c.name = "enlarged";
    c.description =
        "terminal value xi * w(T) with xi independent and known at time 0; "
        "y = xi w(t), z = xi";
    c.enlargement = true;
    c.problem.horizon = T;
    c.problem.terminal.adaptedness = Adaptedness::terminal;
    c.problem.terminal.eval = [](const PathBatch& b, std::size_t p, double) {
        return b.enlargement_value(p) * terminal_brownian(b, p);
    };
    c.problem.terminal.symbolic = [](const SymbolicContext& ctx, double) {
        return poly_mul(ctx.enlargement_coordinate(),
                        ctx.brownian(ctx.grid.horizon()));
    };
    c.oracle.y.adaptedness = Adaptedness::adapted;
    c.oracle.y.eval = [](const PathBatch& b, std::size_t p, double t) {
        return b.enlargement_value(p) * brownian_value(b, p, t);
    };
    c.oracle.y.symbolic = [](const SymbolicContext& ctx, double t) {
        return poly_mul(ctx.enlargement_coordinate(), ctx.brownian(t));
    };
    c.oracle.z.adaptedness = Adaptedness::adapted;
    c.oracle.z.eval = [](const PathBatch& b, std::size_t p, double) {
        return b.enlargement_value(p);
    };
    c.oracle.z.symbolic = [](const SymbolicContext& ctx, double) {
        return ctx.enlargement_coordinate();
    };
    c.oracle.derivation =
        "xi is known at time 0, so y(t) = E[xi w(T)|F_t] = xi w(t) and "
        "d(xi w) = xi dw gives z = xi.";
    return c;
}

}  // namespace

BenchmarkCase benchmark(const std::string& name, double horizon) {
    if (!(horizon > 0.0)) {
        throw std::invalid_argument("benchmark: horizon must be positive");
    }
    if (name == "bm") return make_bm(horizon);
    if (name == "bm_squared") return make_bm_squared(horizon);
    if (name == "geometric") return make_geometric(horizon);
    if (name == "const_driver") return make_const_driver(horizon);
    if (name == "enlarged") return make_enlarged(horizon);
    throw std::out_of_range("benchmark: unknown name '" + name + "'");
}

std::vector<std::string> benchmark_names() {
    return {"bm", "bm_squared", "geometric", "const_driver", "enlarged"};
}

std::vector<Expectation> direct_projection(const PathFunctional& process,
                                           const FiniteElementSpace& space,
                                           const ExpectationEngine& engine,
                                           int threads) {
    const DyadicGrid& grid = space.grid();
    std::vector<Expectation> out(space.size());

    if (engine.is_exact()) {
        if (!process.has_symbolic()) {
            throw unsupported_data_error(
                "exact engine: process has no polynomial form");
        }
        const SymbolicContext ctx{grid, space.enlargement()};
        const double delta = grid.block_width();
        const auto& rule = gauss5();
        parallel_for(grid.block_count(), threads, [&](std::size_t k) {
            const double t_k = grid.time(k);
            std::array<GaussianPolynomial, 5> at_node;
            for (int n = 0; n < 5; ++n) {
                const double tau = t_k + 0.5 * delta * (rule.node[n] + 1.0);
                at_node[n] = process.symbolic(ctx, tau);
            }
            const std::size_t lo = space.block_begin(k);
            const std::size_t hi = lo + space.block_size(k);
            for (std::size_t flat = lo; flat < hi; ++flat) {
                const GaussianPolynomial h_poly = chaos_to_poly(space.element(flat).h);
                double integral = 0.0;
                for (int n = 0; n < 5; ++n) {
                    integral += rule.weight[n] * expect_product(at_node[n], h_poly);
                }
                out[flat] = {0.5 * delta * integral, 0.0};
            }
        });
        return out;
    }

    const PathBatch& batch = engine.batch();
    if (batch.grid().horizon() != grid.horizon() ||
        batch.grid().level() < grid.level()) {
        throw std::invalid_argument(
            "direct_projection: batch must live on the space's horizon at the "
            "same or finer level");
    }
    const DyadicGrid& fine = batch.grid();
    const std::size_t S = batch.count();
    const std::size_t stride = fine.block_count() / grid.block_count();
    const double fine_delta = fine.block_width();

    const std::size_t coarse_blocks = grid.block_count();
    std::vector<double> coord_matrix(S * coarse_blocks);
    {
        std::vector<double> row;
        for (std::size_t p = 0; p < S; ++p) {
            batch.fill_normalized_at_level(p, grid.level(), row);
            std::copy(row.begin(), row.end(), coord_matrix.begin() + p * coarse_blocks);
        }
    }

    parallel_for(grid.block_count(), threads, [&](std::size_t k) {
        // Trapezoid integral of the process over the block, per path; shared
        // by all elements of the block.
        std::vector<double> block_integral(S, 0.0);
        std::vector<double> prev(S), cur(S);
        for (std::size_t p = 0; p < S; ++p) {
            prev[p] = process.eval(batch, p, fine.time(k * stride));
        }
        for (std::size_t l = k * stride; l < (k + 1) * stride; ++l) {
            const double t_next = fine.time(l + 1);
            for (std::size_t p = 0; p < S; ++p) {
                cur[p] = process.eval(batch, p, t_next);
                block_integral[p] += 0.5 * fine_delta * (prev[p] + cur[p]);
            }
            std::swap(prev, cur);
        }
        std::vector<double> combined(S);
        const std::size_t lo = space.block_begin(k);
        const std::size_t hi = lo + space.block_size(k);
        for (std::size_t flat = lo; flat < hi; ++flat) {
            const ChaosBasisFunction& h = space.element(flat).h;
            for (std::size_t p = 0; p < S; ++p) {
                PathCoords pc{{coord_matrix.data() + p * coarse_blocks, coarse_blocks},
                              std::nullopt};
                if (space.enlargement()) pc.enlargement = batch.enlargement_value(p);
                combined[p] = eval_h(h, pc) * block_integral[p];
            }
            out[flat] = mc_expect(combined);
        }
    });
    return out;
}

PathFunctional to_functional(const StepProcess& process) {
    PathFunctional f;
    f.adaptedness = Adaptedness::adapted;
    f.eval = [process](const PathBatch& batch, std::size_t path, double t) {
        return process.value(batch, path, t);
    };
    // The block polynomials are written in the process's own grid
    // coordinates, so the symbolic form is only valid in a context at that
    // level.
    f.symbolic = [process](const SymbolicContext& ctx, double t) {
        if (ctx.grid.level() != process.space->grid().level()) {
            throw std::invalid_argument(
                "to_functional: symbolic form requested at a different grid level");
        }
        return process.block_poly(process.space->grid().block_index(t));
    };
    return f;
}

Expectation nested_mc_conditional(const PathFunctional& terminal,
                                  const DyadicGrid& grid,
                                  std::span<const double> prefix_increments,
                                  std::optional<double> enlargement_value,
                                  double t, std::size_t inner_samples,
                                  std::uint64_t seed) {
    if (inner_samples == 0) {
        throw std::invalid_argument("nested_mc_conditional: inner_samples must be >= 1");
    }
    const double idx = std::round(t / grid.block_width());
    const std::size_t frozen = static_cast<std::size_t>(idx);
    if (!(t >= 0.0) || t > grid.horizon() || grid.time(frozen) != t) {
        throw std::invalid_argument("nested_mc_conditional: t must be a grid time");
    }
    if (prefix_increments.size() < frozen) {
        throw std::invalid_argument("nested_mc_conditional: prefix too short");
    }
    const std::size_t blocks = grid.block_count();
    const double sqrt_delta = std::sqrt(grid.block_width());
    std::vector<double> inc(inner_samples * blocks);
    for (std::size_t p = 0; p < inner_samples; ++p) {
        double* row = inc.data() + p * blocks;
        for (std::size_t j = 0; j < frozen; ++j) row[j] = prefix_increments[j];
        for (std::size_t j = frozen; j < blocks; ++j) {
            row[j] = sqrt_delta * gaussian_draw(seed, p, static_cast<std::uint32_t>(j),
                                                RngDomain::increment);
        }
    }
    std::optional<std::vector<double>> xi;
    if (enlargement_value) {
        xi.emplace(inner_samples, *enlargement_value);
    }
    const PathBatch continuations =
        PathBatch::from_increments(grid, std::move(inc), std::move(xi), seed);
    std::vector<double> values(inner_samples);
    for (std::size_t p = 0; p < inner_samples; ++p) {
        values[p] = terminal.eval(continuations, p, grid.horizon());
    }
    return mc_expect(values);
}

namespace {

Expectation closed_form_residual_exact(const ClosedFormSolution& oracle,
                                       const TestTriple& triple,
                                       const BSDEProblem& problem) {
    const FiniteElementSpace& uspace = *triple.u.space;
    const DyadicGrid& grid = uspace.grid();
    if (!(triple.v.space->grid() == grid)) {
        throw std::invalid_argument(
            "closed_form_residual: u and v must share a grid");
    }
    if (!oracle.y.has_symbolic() || !oracle.z.has_symbolic() ||
        !problem.terminal.has_symbolic() ||
        (problem.driver && !problem.driver->has_symbolic())) {
        throw unsupported_data_error(
            "exact engine: closed form has no polynomial form");
    }
    const bool enl = uspace.enlargement() || triple.v.space->enlargement();
    const SymbolicContext ctx{grid, enl};
    const double delta = grid.block_width();
    const double sqrt_delta = std::sqrt(delta);
    const auto& rule = gauss5();
    const std::size_t start = grid.block_index(triple.start_time);
    if (grid.time(start) != triple.start_time) {
        throw std::invalid_argument("closed_form_residual: start must be a grid time");
    }

    GaussianPolynomial z = triple.eta
                               ? triple.eta->symbolic(ctx, triple.start_time)
                               : GaussianPolynomial();
    const GaussianPolynomial eta_poly = z;
    double driver_term = 0.0;
    double u_term = 0.0;
    double v_term = 0.0;
    const GaussianPolynomial bridge =
        GaussianPolynomial::coordinate(GaussianPolynomial::kBridge);
    for (std::size_t l = start; l < grid.block_count(); ++l) {
        const double t_l = grid.time(l);
        const GaussianPolynomial u_poly = triple.u.block_poly(l);
        const GaussianPolynomial v_poly = triple.v.block_poly(l);
        for (int n = 0; n < 5; ++n) {
            const double tau = t_l + 0.5 * delta * (rule.node[n] + 1.0);
            const double w = 0.5 * delta * rule.weight[n];
            u_term += w * expect_product(u_poly, oracle.y.symbolic(ctx, tau));
            v_term += w * expect_product(v_poly, oracle.z.symbolic(ctx, tau));
            if (problem.driver) {
                // z at an interior time: grid value + drift ramp + the
                // Brownian remainder carried by the shared bridge coordinate.
                GaussianPolynomial z_node = z;
                z_node += (tau - t_l) * u_poly;
                z_node += std::sqrt(tau - t_l) * poly_mul(v_poly, bridge);
                driver_term +=
                    w * expect_product(z_node, problem.driver->symbolic(ctx, tau));
            }
        }
        z += delta * u_poly;
        z += poly_mul(sqrt_delta * GaussianPolynomial::coordinate(
                                       static_cast<GaussianPolynomial::Coord>(l)),
                      v_poly);
    }
    const GaussianPolynomial terminal_poly =
        problem.terminal.symbolic(ctx, grid.horizon());
    const double lhs =
        expect_product(z, terminal_poly) -
        expect_product(eta_poly, oracle.y.symbolic(ctx, triple.start_time));
    return {lhs - driver_term - u_term - v_term, 0.0};
}

Expectation closed_form_residual_mc(const ClosedFormSolution& oracle,
                                    const TestTriple& triple,
                                    const BSDEProblem& problem,
                                    const PathBatch& batch) {
    const DyadicGrid& fine = batch.grid();
    const double fine_delta = fine.block_width();
    const double horizon = fine.horizon();
    const double start_idx = std::round(triple.start_time / fine_delta);
    const std::size_t start = static_cast<std::size_t>(start_idx);
    if (fine.time(start) != triple.start_time) {
        throw std::invalid_argument("closed_form_residual: start must be a grid time");
    }
    std::vector<double> pathwise(batch.count());
    for (std::size_t p = 0; p < batch.count(); ++p) {
        double z = triple.eta ? triple.eta->eval(batch, p, triple.start_time) : 0.0;
        const double eta_val = z;
        double driver_term = 0.0;
        double u_term = 0.0;
        double v_term = 0.0;
        const auto inc = batch.increments(p);
        double y_prev = oracle.y.eval(batch, p, triple.start_time);
        double z_prev = oracle.z.eval(batch, p, triple.start_time);
        double f_prev = problem.driver ? problem.driver->eval(batch, p, triple.start_time)
                                       : 0.0;
        for (std::size_t l = start; l < fine.block_count(); ++l) {
            const double t_next = fine.time(l + 1);
            const double u_val = triple.u.value(batch, p, fine.time(l));
            const double v_val = triple.v.value(batch, p, fine.time(l));
            const double z_next = z + u_val * fine_delta + v_val * inc[l];
            const double y_next = oracle.y.eval(batch, p, t_next);
            const double zz_next = oracle.z.eval(batch, p, t_next);
            u_term += 0.5 * fine_delta * u_val * (y_prev + y_next);
            v_term += 0.5 * fine_delta * v_val * (z_prev + zz_next);
            if (problem.driver) {
                const double f_next = problem.driver->eval(batch, p, t_next);
                driver_term += 0.5 * fine_delta * (z * f_prev + z_next * f_next);
                f_prev = f_next;
            }
            z = z_next;
            y_prev = y_next;
            z_prev = zz_next;
        }
        const double terminal_val = problem.terminal.eval(batch, p, horizon);
        const double y_start = oracle.y.eval(batch, p, triple.start_time);
        pathwise[p] =
            z * terminal_val - eta_val * y_start - driver_term - u_term - v_term;
    }
    return mc_expect(pathwise);
}

}  // namespace

Expectation closed_form_residual(const ClosedFormSolution& oracle,
                                 const TestTriple& triple,
                                 const BSDEProblem& problem,
                                 const ExpectationEngine& engine) {
    if (!triple.u.space || !triple.v.space) {
        throw std::invalid_argument("closed_form_residual: triple lacks a space");
    }
    if (engine.is_exact()) {
        return closed_form_residual_exact(oracle, triple, problem);
    }
    return closed_form_residual_mc(oracle, triple, problem, engine.batch());
}

}  // namespace fintra
