#include "fintra/solver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

#include "fintra/parallel.hpp"

namespace fintra {

void validate_problem(const BSDEProblem& problem) {
    if (problem.dimension != 1) {
        throw std::invalid_argument(
            "BSDEProblem: only scalar problems are supported; vector problems "
            "with a one-dimensional Brownian motion decouple componentwise");
    }
    if (!(problem.horizon > 0.0)) {
        throw std::invalid_argument("BSDEProblem: horizon must be positive");
    }
    if (!problem.terminal.eval) {
        throw std::invalid_argument("BSDEProblem: terminal condition missing");
    }
    if (problem.driver && problem.lipschitz) {
        throw std::invalid_argument(
            "BSDEProblem: provide either a linear or a Lipschitz driver, not both");
    }
}

namespace {

thread_local std::vector<double> tl_coords;

PathCoords coords_for(const FiniteElementSpace& space, const PathBatch& batch,
                      std::size_t path) {
    batch.fill_normalized_at_level(path, space.grid().level(), tl_coords);
    PathCoords pc{tl_coords, std::nullopt};
    if (space.enlargement()) pc.enlargement = batch.enlargement_value(path);
    return pc;
}

// Integral of the block-k clip weight over fine block l: the weight is
// linear between fine grid times, so the trapezoid is exact.
double clip_block_integral(const DyadicGrid& coarse, std::size_t k,
                           const DyadicGrid& fine, std::size_t l) {
    const double a = coarse.clip_weight(k, fine.time(l));
    const double b = coarse.clip_weight(k, fine.time(l + 1));
    return 0.5 * fine.block_width() * (a + b);
}

void check_mc_batch(const FiniteElementSpace& space, const PathBatch& batch) {
    if (batch.grid().horizon() != space.grid().horizon()) {
        throw std::invalid_argument("Monte Carlo batch horizon does not match space");
    }
    if (batch.grid().level() < space.grid().level()) {
        throw std::invalid_argument(
            "Monte Carlo batch must be at the space's level or finer");
    }
    if (space.enlargement() && !batch.has_enlargement()) {
        throw std::invalid_argument(
            "space uses the enlargement variable but the batch carries none");
    }
}

struct TablePair {
    std::vector<Expectation> alpha;
    std::vector<Expectation> beta;
};

TablePair exact_tables(const BSDEProblem& problem, const FiniteElementSpace& space,
                       int threads) {
    if (!problem.terminal.has_symbolic()) {
        throw unsupported_data_error(
            "exact engine: terminal condition has no polynomial form");
    }
    if (problem.driver && !problem.driver->has_symbolic()) {
        throw unsupported_data_error(
            "exact engine: driver has no polynomial form");
    }
    const DyadicGrid& grid = space.grid();
    const double horizon = grid.horizon();
    const double delta = grid.block_width();
    const double sqrt_delta = std::sqrt(delta);
    const SymbolicContext ctx{grid, space.enlargement()};
    const GaussianPolynomial terminal_poly = problem.terminal.symbolic(ctx, horizon);

    std::vector<GaussianPolynomial> driver_polys;
    if (problem.driver) {
        driver_polys.reserve(grid.block_count());
        for (std::size_t l = 0; l < grid.block_count(); ++l) {
            driver_polys.push_back(problem.driver->symbolic(ctx, grid.time(l)));
        }
    }

    TablePair out;
    out.alpha.resize(space.size());
    out.beta.resize(space.size());
    parallel_for(space.size(), threads, [&](std::size_t flat) {
        const auto [k, i] = space.locate(flat);
        (void)i;
        const GaussianPolynomial h_poly = chaos_to_poly(space.element(flat).h);
        double alpha = delta * expect_product(h_poly, terminal_poly);
        const GaussianPolynomial dw_h = poly_mul(
            sqrt_delta * GaussianPolynomial::coordinate(
                             static_cast<GaussianPolynomial::Coord>(k)),
            h_poly);
        double beta = expect_product(dw_h, terminal_poly);
        if (problem.driver) {
            for (std::size_t l = k; l < grid.block_count(); ++l) {
                alpha -= clip_block_integral(grid, k, grid, l) *
                         expect_product(h_poly, driver_polys[l]);
            }
            // The clipped Brownian weight at left endpoints vanishes through
            // block k and equals the full block increment afterwards.
            for (std::size_t l = k + 1; l < grid.block_count(); ++l) {
                beta -= delta * expect_product(dw_h, driver_polys[l]);
            }
        }
        out.alpha[flat] = {alpha, 0.0};
        out.beta[flat] = {beta, 0.0};
    });
    return out;
}

TablePair mc_tables(const BSDEProblem& problem, const FiniteElementSpace& space,
                    const PathBatch& batch, int threads) {
    check_mc_batch(space, batch);
    const DyadicGrid& coarse = space.grid();
    const DyadicGrid& fine = batch.grid();
    const std::size_t S = batch.count();
    const std::size_t fine_blocks = fine.block_count();
    const std::size_t stride = fine_blocks / coarse.block_count();
    const double delta = coarse.block_width();
    const double fine_delta = fine.block_width();

    std::vector<double> terminal_values(S);
    for (std::size_t p = 0; p < S; ++p) {
        terminal_values[p] = problem.terminal.eval(batch, p, coarse.horizon());
    }

    // Driver samples at fine left endpoints, and the running Brownian values
    // needed for the clipped-increment weight.
    std::vector<double> driver_values;
    std::vector<double> cumulative;  // S x (fine_blocks + 1)
    if (problem.driver) {
        driver_values.resize(fine_blocks * S);
        for (std::size_t l = 0; l < fine_blocks; ++l) {
            const double t = fine.time(l);
            double* row = driver_values.data() + l * S;
            for (std::size_t p = 0; p < S; ++p) {
                row[p] = problem.driver->eval(batch, p, t);
            }
        }
        cumulative.resize(S * (fine_blocks + 1));
        for (std::size_t p = 0; p < S; ++p) {
            double* row = cumulative.data() + p * (fine_blocks + 1);
            row[0] = 0.0;
            const auto inc = batch.increments(p);
            for (std::size_t l = 0; l < fine_blocks; ++l) row[l + 1] = row[l] + inc[l];
        }
    }

    // Normalized coordinates at the space level, one row per path.
    const std::size_t coarse_blocks = coarse.block_count();
    std::vector<double> coord_matrix(S * coarse_blocks);
    {
        std::vector<double> row;
        for (std::size_t p = 0; p < S; ++p) {
            batch.fill_normalized_at_level(p, coarse.level(), row);
            std::copy(row.begin(), row.end(), coord_matrix.begin() + p * coarse_blocks);
        }
    }

    TablePair out;
    out.alpha.resize(space.size());
    out.beta.resize(space.size());

    parallel_for(coarse.block_count(), threads, [&](std::size_t k) {
        const std::size_t fine_begin = k * stride;
        const std::size_t fine_end = (k + 1) * stride;

        // Per-path driver terms shared by every element of the block:
        // G = sum_l W(k,l) f(t_l), C = sum_l fine_delta clipw(t_l) f(t_l).
        std::vector<double> alpha_weight(S, 0.0);
        std::vector<double> beta_weight(S, 0.0);
        if (problem.driver) {
            for (std::size_t l = fine_begin; l < fine_blocks; ++l) {
                const double w = clip_block_integral(coarse, k, fine, l);
                const double* f_row = driver_values.data() + l * S;
                for (std::size_t p = 0; p < S; ++p) {
                    const double* cum = cumulative.data() + p * (fine_blocks + 1);
                    const double clipw =
                        cum[std::min(l, fine_end)] - cum[std::min(l, fine_begin)];
                    alpha_weight[p] += w * f_row[p];
                    beta_weight[p] += fine_delta * clipw * f_row[p];
                }
            }
        }

        std::vector<double> h_values(S);
        std::vector<double> combined(S);
        std::vector<double> block_increment(S);
        for (std::size_t p = 0; p < S; ++p) {
            double dw = 0.0;
            const auto inc = batch.increments(p);
            for (std::size_t l = fine_begin; l < fine_end; ++l) dw += inc[l];
            block_increment[p] = dw;
        }

        const std::size_t lo = space.block_begin(k);
        const std::size_t hi = lo + space.block_size(k);
        for (std::size_t flat = lo; flat < hi; ++flat) {
            const ChaosBasisFunction& h = space.element(flat).h;
            for (std::size_t p = 0; p < S; ++p) {
                PathCoords pc{{coord_matrix.data() + p * coarse_blocks, coarse_blocks},
                              std::nullopt};
                if (space.enlargement()) pc.enlargement = batch.enlargement_value(p);
                h_values[p] = eval_h(h, pc);
            }
            for (std::size_t p = 0; p < S; ++p) {
                combined[p] = h_values[p] * (delta * terminal_values[p] - alpha_weight[p]);
            }
            out.alpha[flat] = mc_expect(combined);
            for (std::size_t p = 0; p < S; ++p) {
                combined[p] =
                    h_values[p] * (block_increment[p] * terminal_values[p] - beta_weight[p]);
            }
            out.beta[flat] = mc_expect(combined);
        }
    });
    return out;
}

TablePair compute_tables(const BSDEProblem& problem, const FiniteElementSpace& space,
                         const ExpectationEngine& engine, int threads) {
    validate_problem(problem);
    if (!problem.is_linear()) {
        throw std::invalid_argument(
            "coefficient formulas need a linear (state-independent) driver");
    }
    if (engine.is_exact()) return exact_tables(problem, space, threads);
    return mc_tables(problem, space, engine.batch(), threads);
}

}  // namespace

std::vector<Expectation> compute_alpha(const BSDEProblem& problem,
                                       const FiniteElementSpace& space,
                                       const ExpectationEngine& engine, int threads) {
    return compute_tables(problem, space, engine, threads).alpha;
}

std::vector<Expectation> compute_beta(const BSDEProblem& problem,
                                      const FiniteElementSpace& space,
                                      const ExpectationEngine& engine, int threads) {
    return compute_tables(problem, space, engine, threads).beta;
}

CoefficientTable make_table(const FiniteElementSpace& space,
                            const std::vector<Expectation>& alphas,
                            const std::vector<Expectation>& betas) {
    if (alphas.size() != space.size() || betas.size() != space.size()) {
        throw std::invalid_argument("make_table: entry count does not match space");
    }
    CoefficientTable t;
    t.level = space.grid().level();
    t.degree = space.degree();
    t.enlargement = space.enlargement();
    t.alpha.reserve(alphas.size());
    t.alpha_std_error.reserve(alphas.size());
    t.beta.reserve(betas.size());
    t.beta_std_error.reserve(betas.size());
    for (const auto& e : alphas) {
        t.alpha.push_back(e.value);
        t.alpha_std_error.push_back(e.std_error);
    }
    for (const auto& e : betas) {
        t.beta.push_back(e.value);
        t.beta_std_error.push_back(e.std_error);
    }
    return t;
}

double StepProcess::value(const PathBatch& batch, std::size_t path, double t) const {
    return value_at_block(batch, path, space->grid().block_index(t));
}

double StepProcess::value_at_block(const PathBatch& batch, std::size_t path,
                                   std::size_t block) const {
    const PathCoords pc = coords_for(*space, batch, path);
    const std::size_t lo = space->block_begin(block);
    const std::size_t hi = lo + space->block_size(block);
    double v = 0.0;
    for (std::size_t flat = lo; flat < hi; ++flat) {
        if (coef[flat] == 0.0) continue;
        v += coef[flat] * eval_h(space->element(flat).h, pc);
    }
    return v;
}

GaussianPolynomial StepProcess::block_poly(std::size_t block) const {
    GaussianPolynomial out;
    const std::size_t lo = space->block_begin(block);
    const std::size_t hi = lo + space->block_size(block);
    for (std::size_t flat = lo; flat < hi; ++flat) {
        if (coef[flat] == 0.0) continue;
        out += coef[flat] * chaos_to_poly(space->element(flat).h);
    }
    return out;
}

double StepProcess::l2_norm() const {
    double s = 0.0;
    for (double c : coef) s += c * c;
    return std::sqrt(s);
}

double StepProcessSolution::y(const PathBatch& batch, std::size_t path, double t) const {
    return y_process().value(batch, path, t);
}

double StepProcessSolution::z(const PathBatch& batch, std::size_t path, double t) const {
    return z_process().value(batch, path, t);
}

StepProcess StepProcessSolution::y_process() const { return {space, table.alpha}; }

StepProcess StepProcessSolution::z_process() const { return {space, table.beta}; }

StepProcessSolution assemble_solution(std::shared_ptr<const FiniteElementSpace> space,
                                      CoefficientTable table) {
    if (!space) throw std::invalid_argument("assemble_solution: null space");
    if (table.alpha.size() != space->size() || table.beta.size() != space->size() ||
        table.alpha_std_error.size() != space->size() ||
        table.beta_std_error.size() != space->size()) {
        throw std::invalid_argument(
            "assemble_solution: coefficient table does not cover the space");
    }
    return {std::move(space), std::move(table)};
}

StepProcessSolution solve_linear(const BSDEProblem& problem, int level, int degree,
                                 const ExpectationEngine& engine, bool enlargement,
                                 int threads) {
    const DyadicGrid grid(level, problem.horizon);
    auto space = std::make_shared<FiniteElementSpace>(grid, degree, enlargement);
    TablePair tables = compute_tables(problem, *space, engine, threads);
    return assemble_solution(space, make_table(*space, tables.alpha, tables.beta));
}

namespace {

std::size_t grid_time_index(const DyadicGrid& grid, double t, const char* what) {
    if (!(t >= 0.0) || !(t <= grid.horizon())) {
        throw std::invalid_argument(std::string(what) + ": time outside [0, T]");
    }
    const double idx = std::round(t / grid.block_width());
    const std::size_t l = static_cast<std::size_t>(idx);
    if (l > grid.block_count() || grid.time(l) != t) {
        throw std::invalid_argument(std::string(what) + ": " + std::to_string(t) +
                                    " is not a grid time");
    }
    return l;
}

double variational_residual_exact(const StepProcessSolution& solution,
                                  const TestTriple& triple,
                                  const BSDEProblem& problem) {
    const FiniteElementSpace& space = *solution.space;
    const DyadicGrid& grid = space.grid();
    if (!(triple.u.space->grid() == grid) || !(triple.v.space->grid() == grid)) {
        throw std::invalid_argument(
            "variational_residual: test processes must live on the solution grid");
    }
    if (!problem.terminal.has_symbolic() ||
        (problem.driver && !problem.driver->has_symbolic())) {
        throw unsupported_data_error(
            "exact engine: problem data has no polynomial form");
    }
    const bool enl = space.enlargement() || triple.u.space->enlargement() ||
                     triple.v.space->enlargement();
    const SymbolicContext ctx{grid, enl};
    const double delta = grid.block_width();
    const double sqrt_delta = std::sqrt(delta);
    const std::size_t start = grid_time_index(grid, triple.start_time,
                                              "variational_residual");

    const GaussianPolynomial terminal_poly =
        problem.terminal.symbolic(ctx, grid.horizon());
    GaussianPolynomial z = triple.eta
                               ? triple.eta->symbolic(ctx, triple.start_time)
                               : GaussianPolynomial();
    const GaussianPolynomial eta_poly = z;

    double driver_term = 0.0;
    double u_term = 0.0;
    double v_term = 0.0;
    for (std::size_t l = start; l < grid.block_count(); ++l) {
        const GaussianPolynomial u_poly = triple.u.block_poly(l);
        const GaussianPolynomial v_poly = triple.v.block_poly(l);
        if (problem.driver) {
            const GaussianPolynomial f_poly =
                problem.driver->symbolic(ctx, grid.time(l));
            // int_block <z, f(t_l)>: z's drift part is linear in tau and is
            // integrated in closed form, matching the alpha quadrature.
            driver_term += delta * (expect_product(z, f_poly) +
                                    0.5 * delta * expect_product(u_poly, f_poly));
        }
        u_term += delta * expect_product(u_poly, solution.y_process().block_poly(l));
        v_term += delta * expect_product(v_poly, solution.z_process().block_poly(l));
        z += delta * u_poly;
        z += poly_mul(sqrt_delta * GaussianPolynomial::coordinate(
                                       static_cast<GaussianPolynomial::Coord>(l)),
                      v_poly);
    }

    const std::size_t eta_block = grid.block_index(triple.start_time);
    const double lhs = expect_product(z, terminal_poly) -
                       expect_product(eta_poly,
                                      solution.y_process().block_poly(eta_block));
    return lhs - driver_term - u_term - v_term;
}

double variational_residual_mc(const StepProcessSolution& solution,
                               const TestTriple& triple, const BSDEProblem& problem,
                               const PathBatch& batch) {
    const FiniteElementSpace& space = *solution.space;
    check_mc_batch(space, batch);
    check_mc_batch(*triple.u.space, batch);
    check_mc_batch(*triple.v.space, batch);
    const DyadicGrid& fine = batch.grid();
    const double fine_delta = fine.block_width();
    const std::size_t start = grid_time_index(fine, triple.start_time,
                                              "variational_residual");
    const double horizon = fine.horizon();

    std::vector<double> pathwise(batch.count());
    for (std::size_t p = 0; p < batch.count(); ++p) {
        double z = triple.eta ? triple.eta->eval(batch, p, triple.start_time) : 0.0;
        const double eta_val = z;
        double driver_term = 0.0;
        double u_term = 0.0;
        double v_term = 0.0;
        const auto inc = batch.increments(p);
        for (std::size_t l = start; l < fine.block_count(); ++l) {
            const double t = fine.time(l);
            const double u_val = triple.u.value(batch, p, t);
            const double v_val = triple.v.value(batch, p, t);
            if (problem.driver) {
                const double f_val = problem.driver->eval(batch, p, t);
                driver_term += fine_delta * (z + 0.5 * fine_delta * u_val) * f_val;
            }
            u_term += fine_delta * u_val * solution.y(batch, p, t);
            v_term += fine_delta * v_val * solution.z(batch, p, t);
            z += u_val * fine_delta + v_val * inc[l];
        }
        const double terminal_val = problem.terminal.eval(batch, p, horizon);
        const double y_at_start = solution.y(batch, p, triple.start_time);
        pathwise[p] =
            z * terminal_val - eta_val * y_at_start - driver_term - u_term - v_term;
    }
    return mc_expect(pathwise).value;
}

}  // namespace

double variational_residual(const StepProcessSolution& solution,
                            const TestTriple& triple, const BSDEProblem& problem,
                            const ExpectationEngine& engine) {
    validate_problem(problem);
    if (!triple.u.space || !triple.v.space) {
        throw std::invalid_argument("variational_residual: triple lacks a space");
    }
    if (engine.is_exact()) {
        return variational_residual_exact(solution, triple, problem);
    }
    return variational_residual_mc(solution, triple, problem, engine.batch());
}

PicardResult solve_nonlinear_picard(const BSDEProblem& problem, int level, int degree,
                                    const ExpectationEngine& engine, int max_iter,
                                    double tol, int threads) {
    validate_problem(problem);
    if (!problem.lipschitz) {
        throw std::invalid_argument("solve_nonlinear_picard: Lipschitz driver required");
    }
    if (engine.is_exact()) {
        throw std::invalid_argument(
            "solve_nonlinear_picard: the composed driver is not polynomial; "
            "use a Monte Carlo engine");
    }
    if (max_iter < 1) {
        throw std::invalid_argument("solve_nonlinear_picard: max_iter must be >= 1");
    }
    const DyadicGrid grid(level, problem.horizon);
    auto space = std::make_shared<FiniteElementSpace>(grid, degree, false);

    CoefficientTable table;
    table.level = level;
    table.degree = degree;
    table.alpha.assign(space->size(), 0.0);
    table.beta.assign(space->size(), 0.0);
    table.alpha_std_error.assign(space->size(), 0.0);
    table.beta_std_error.assign(space->size(), 0.0);
    StepProcessSolution current = assemble_solution(space, std::move(table));

    const auto& f = problem.lipschitz->f;
    PicardResult result;
    for (int m = 1; m <= max_iter; ++m) {
        BSDEProblem frozen;
        frozen.dimension = problem.dimension;
        frozen.horizon = problem.horizon;
        frozen.terminal = problem.terminal;
        PathFunctional driver;
        driver.adaptedness = Adaptedness::adapted;
        const StepProcessSolution prev = current;
        driver.eval = [prev, &f](const PathBatch& batch, std::size_t path, double t) {
            return f(t, prev.y(batch, path, t), prev.z(batch, path, t));
        };
        frozen.driver = std::move(driver);

        TablePair tables = mc_tables(frozen, *space, engine.batch(), threads);
        StepProcessSolution next =
            assemble_solution(space, make_table(*space, tables.alpha, tables.beta));

        // Orthonormal basis: the L^2(Omega x [0,T]) change is the Euclidean
        // distance between coefficient vectors.
        double dy = 0.0;
        double dz = 0.0;
        for (std::size_t a = 0; a < space->size(); ++a) {
            const double da = next.table.alpha[a] - current.table.alpha[a];
            const double db = next.table.beta[a] - current.table.beta[a];
            dy += da * da;
            dz += db * db;
        }
        current = std::move(next);
        result.iterations = m;
        if (std::sqrt(dy) <= tol && std::sqrt(dz) <= tol) {
            result.converged = true;
            break;
        }
    }
    result.solution = std::move(current);
    return result;
}

void write_coefficient_csv(const CoefficientTable& table,
                           const FiniteElementSpace& space, std::ostream& os) {
    if (table.alpha.size() != space.size() || table.beta.size() != space.size()) {
        throw std::invalid_argument("write_coefficient_csv: table/space mismatch");
    }
    os << "k,i,alpha,beta,alpha_stderr,beta_stderr\n";
    char buf[32];
    const auto put = [&](double v) {
        std::snprintf(buf, sizeof(buf), "%.17g", v);
        os << buf;
    };
    for (std::size_t flat = 0; flat < space.size(); ++flat) {
        const auto [k, i] = space.locate(flat);
        os << k << ',' << i << ',';
        put(table.alpha[flat]);
        os << ',';
        put(table.beta[flat]);
        os << ',';
        put(table.alpha_std_error.empty() ? 0.0 : table.alpha_std_error[flat]);
        os << ',';
        put(table.beta_std_error.empty() ? 0.0 : table.beta_std_error[flat]);
        os << '\n';
    }
}

}  // namespace fintra
