#include "fintra/cli.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "fintra/metrics.hpp"
#include "fintra/oracles.hpp"
#include "fintra/rng.hpp"
#include "fintra/solver.hpp"

namespace fintra {

namespace {

using nlohmann::json;

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

long long elapsed_ms(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration_cast<std::chrono::milliseconds>(
               std::chrono::steady_clock::now() - start)
        .count();
}

// ---------------------------------------------------------------------------
// Config file: flat key=value lines, '#' comments. Flags override the file.

struct ConfigError {
    std::string message;
};

void apply_config_line(CliConfig& cfg, const std::string& key,
                       const std::string& value, const std::string& where) {
    const auto fail = [&](const std::string& what) {
        throw ConfigError{where + ": " + what};
    };
    try {
        if (key == "benchmark") {
            cfg.benchmark_name = value;
        } else if (key == "level") {
            cfg.level = std::stoi(value);
        } else if (key == "levels") {
            const auto colon = value.find(':');
            if (colon == std::string::npos) fail("levels must look like A:B");
            cfg.levels_lo = std::stoi(value.substr(0, colon));
            cfg.levels_hi = std::stoi(value.substr(colon + 1));
        } else if (key == "degree") {
            cfg.degree = std::stoi(value);
        } else if (key == "engine") {
            if (value != "exact" && value != "mc") fail("engine must be exact or mc");
            cfg.engine = value;
        } else if (key == "samples") {
            cfg.samples = std::stoull(value);
        } else if (key == "seed") {
            cfg.seed = std::stoull(value);
        } else if (key == "enlargement") {
            if (value == "true" || value == "1") {
                cfg.enlargement = true;
            } else if (value == "false" || value == "0") {
                cfg.enlargement = false;
            } else {
                fail("enlargement must be true/false");
            }
        } else if (key == "horizon") {
            cfg.horizon = std::stod(value);
        } else if (key == "output_dir") {
            cfg.output_dir = value;
        } else if (key == "threads") {
            cfg.threads = std::stoi(value);
        } else {
            fail("unknown key '" + key + "'");
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        fail("cannot parse value '" + value + "' for key '" + key + "'");
    }
}

void load_config_file(CliConfig& cfg, const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError{path + ": cannot open config file"};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string where = path + ":" + std::to_string(line_no);
        std::string stripped = line;
        const auto hash = stripped.find('#');
        if (hash != std::string::npos) stripped.erase(hash);
        const auto first = stripped.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto last = stripped.find_last_not_of(" \t\r");
        stripped = stripped.substr(first, last - first + 1);
        const auto eq = stripped.find('=');
        if (eq == std::string::npos) throw ConfigError{where + ": expected key=value"};
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        const std::string key = trim(stripped.substr(0, eq));
        const std::string value = trim(stripped.substr(eq + 1));
        if (key.empty()) throw ConfigError{where + ": empty key"};
        apply_config_line(cfg, key, value, where);
    }
}

std::string canonical_config(const CliConfig& cfg) {
    std::ostringstream os;
    os << "benchmark=" << cfg.benchmark_name << '\n'
       << "command=" << cfg.command << '\n'
       << "degree=" << cfg.degree << '\n'
       << "engine=" << cfg.engine << '\n'
       << "enlargement=" << (cfg.enlargement ? 1 : 0) << '\n'
       << "horizon=" << format_double(cfg.horizon) << '\n'
       << "level=" << cfg.level << '\n'
       << "levels=" << cfg.levels_lo << ':' << cfg.levels_hi << '\n'
       << "samples=" << cfg.samples << '\n'
       << "seed=" << cfg.seed << '\n';
    return os.str();
}

}  // namespace

std::string config_hash_hex(const CliConfig& cfg) {
    const std::string text = canonical_config(cfg);
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

namespace {

// ---------------------------------------------------------------------------
// Shared run machinery

struct RunContext {
    CliConfig cfg;
    std::filesystem::path out_dir;
    BenchmarkCase bench;
    bool enlargement = false;  // space flag: config or benchmark requirement
};

ExpectationEngine make_engine(const RunContext& ctx, int level) {
    if (ctx.cfg.engine == "exact") return ExpectationEngine::exact();
    const DyadicGrid grid(level, ctx.cfg.horizon);
    auto batch = std::make_shared<PathBatch>(PathBatch::sample(
        grid, ctx.cfg.samples, ctx.cfg.seed, ctx.enlargement));
    return ExpectationEngine::monte_carlo(std::move(batch));
}

// Fresh batch, decorrelated from the solver batch, for error reporting.
PathBatch evaluation_batch(const RunContext& ctx, int level) {
    const int eval_level = std::min(level + 2, 24);
    const DyadicGrid grid(eval_level, ctx.cfg.horizon);
    return PathBatch::sample(grid, ctx.cfg.samples,
                             mix_seed(ctx.cfg.seed, 0xE7A1), ctx.enlargement);
}

struct LevelReport {
    int level = 0;
    ErrorEstimate errors;
    double sup_error2 = 0.0;
    long long wall_ms = 0;
};

LevelReport run_level(const RunContext& ctx, int level,
                      StepProcessSolution* solution_out) {
    const auto start = std::chrono::steady_clock::now();
    const ExpectationEngine engine = make_engine(ctx, level);
    StepProcessSolution solution =
        solve_linear(ctx.bench.problem, level, ctx.cfg.degree, engine,
                     ctx.enlargement, ctx.cfg.threads);
    LevelReport report;
    report.level = level;
    const PathBatch eval = evaluation_batch(ctx, level);
    if (ctx.cfg.engine == "exact") {
        report.errors = l2_error_exact(solution, ctx.bench.oracle, ctx.cfg.threads);
    } else {
        report.errors = l2_error(solution, ctx.bench.oracle, eval, ctx.cfg.threads);
    }
    report.sup_error2 =
        sup_error(solution, ctx.bench.oracle, eval, ctx.cfg.threads).value;
    report.wall_ms = elapsed_ms(start);
    if (solution_out) *solution_out = std::move(solution);
    return report;
}

void write_convergence_row(std::ostream& os, const RunContext& ctx,
                           const LevelReport& r) {
    os << r.level << ',' << ctx.cfg.degree << ',' << ctx.cfg.samples << ','
       << ctx.cfg.seed << ',' << format_double(r.errors.y_error2) << ','
       << format_double(r.errors.y_std_error) << ','
       << format_double(r.errors.z_error2) << ','
       << format_double(r.errors.z_std_error) << ','
       << format_double(r.sup_error2) << ','
       << (ctx.cfg.no_timing ? 0 : r.wall_ms) << '\n';
}

json base_summary(const RunContext& ctx) {
    json j;
    j["command"] = ctx.cfg.command;
    j["benchmark"] = ctx.cfg.benchmark_name;
    j["degree"] = ctx.cfg.degree;
    j["engine"] = ctx.cfg.engine;
    j["samples"] = ctx.cfg.samples;
    j["seed"] = ctx.cfg.seed;
    j["enlargement"] = ctx.enlargement;
    j["horizon"] = ctx.cfg.horizon;
    j["threads"] = ctx.cfg.threads;
    j["config_hash"] = config_hash_hex(ctx.cfg);
    return j;
}

void write_summary(const RunContext& ctx, const json& j) {
    std::ofstream out(ctx.out_dir / "summary.json");
    out << j.dump(2) << '\n';
}

int run_solve(RunContext& ctx, std::ostream& out) {
    StepProcessSolution solution;
    const LevelReport report = run_level(ctx, ctx.cfg.level, &solution);

    {
        std::ofstream csv(ctx.out_dir / "coefficients.csv");
        write_coefficient_csv(solution.table, *solution.space, csv);
    }
    if (!ctx.cfg.dump_basis_path.empty()) {
        std::ofstream dump(ctx.cfg.dump_basis_path);
        dump_basis(*solution.space, dump);
    }
    if (!ctx.cfg.dump_paths_path.empty()) {
        if (ctx.cfg.engine != "mc") {
            throw ConfigError{"--dump-paths needs the Monte Carlo engine"};
        }
        const ExpectationEngine engine = make_engine(ctx, ctx.cfg.level);
        std::ofstream dump(ctx.cfg.dump_paths_path, std::ios::binary);
        write_path_dump(engine.batch(), dump);
    }

    json j = base_summary(ctx);
    j["level"] = ctx.cfg.level;
    j["y_error2"] = report.errors.y_error2;
    j["y_stderr"] = report.errors.y_std_error;
    j["Y_error2"] = report.errors.z_error2;
    j["Y_stderr"] = report.errors.z_std_error;
    j["sup_error2"] = report.sup_error2;
    j["wall_ms"] = ctx.cfg.no_timing ? 0 : report.wall_ms;
    j["outputs"] = {"coefficients.csv"};
    write_summary(ctx, j);

    out << "solve " << ctx.cfg.benchmark_name << " N=" << ctx.cfg.level
        << " d=" << ctx.cfg.degree << " engine=" << ctx.cfg.engine
        << ": y_error2=" << format_double(report.errors.y_error2)
        << " Y_error2=" << format_double(report.errors.z_error2) << '\n';
    return 0;
}

int run_convergence(RunContext& ctx, std::ostream& out) {
    if (ctx.cfg.levels_lo < 0 || ctx.cfg.levels_hi < ctx.cfg.levels_lo) {
        throw ConfigError{"convergence needs --levels A:B with 0 <= A <= B"};
    }
    std::vector<LevelReport> reports;
    for (int level = ctx.cfg.levels_lo; level <= ctx.cfg.levels_hi; ++level) {
        reports.push_back(run_level(ctx, level, nullptr));
    }
    {
        std::ofstream csv(ctx.out_dir / "convergence.csv");
        csv << "N,d,S,seed,y_error2,y_stderr,Y_error2,Y_stderr,sup_error2,wall_ms\n";
        for (const auto& r : reports) write_convergence_row(csv, ctx, r);
    }
    json j = base_summary(ctx);
    j["levels"] = std::to_string(ctx.cfg.levels_lo) + ":" +
                  std::to_string(ctx.cfg.levels_hi);
    std::vector<std::pair<int, double>> y_points, z_points;
    for (const auto& r : reports) {
        if (r.errors.y_error2 > 0.0) y_points.emplace_back(r.level, r.errors.y_error2);
        if (r.errors.z_error2 > 0.0) z_points.emplace_back(r.level, r.errors.z_error2);
    }
    if (y_points.size() >= 3) j["y_rate_slope"] = rate_fit(y_points);
    if (z_points.size() >= 3) j["Y_rate_slope"] = rate_fit(z_points);
    j["outputs"] = {"convergence.csv"};
    write_summary(ctx, j);
    if (j.contains("Y_rate_slope")) {
        out << "convergence " << ctx.cfg.benchmark_name
            << ": Y rate slope = " << format_double(j["Y_rate_slope"]) << '\n';
    } else {
        out << "convergence " << ctx.cfg.benchmark_name << ": done\n";
    }
    return 0;
}

struct Check {
    std::string name;
    double max_defect = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

Check make_check(std::string name, double defect, double tol) {
    return {std::move(name), defect, tol, defect <= tol};
}

std::vector<TestTriple> member_triples(std::shared_ptr<const FiniteElementSpace> space,
                                       std::uint64_t seed, int count) {
    // Unit-norm random coefficient vectors over the space.
    std::vector<TestTriple> triples;
    for (int r = 0; r < count; ++r) {
        TestTriple triple;
        std::vector<double> cu(space->size()), cv(space->size());
        double nu = 0.0, nv = 0.0;
        for (std::size_t a = 0; a < space->size(); ++a) {
            cu[a] = gaussian_draw(mix_seed(seed, 2 * r), a, 0, RngDomain::increment);
            cv[a] = gaussian_draw(mix_seed(seed, 2 * r + 1), a, 0, RngDomain::increment);
            nu += cu[a] * cu[a];
            nv += cv[a] * cv[a];
        }
        for (std::size_t a = 0; a < space->size(); ++a) {
            cu[a] /= std::sqrt(nu);
            cv[a] /= std::sqrt(nv);
        }
        triple.u = {space, std::move(cu)};
        triple.v = {space, std::move(cv)};
        triples.push_back(std::move(triple));
    }
    return triples;
}

int run_validate(RunContext& ctx, std::ostream& out) {
    std::vector<Check> checks;
    const ExpectationEngine exact = ExpectationEngine::exact();

    // Orthonormality, exact and sampled.
    {
        const DyadicGrid grid(ctx.cfg.level, ctx.cfg.horizon);
        const FiniteElementSpace space(grid, ctx.cfg.degree, ctx.enlargement);
        checks.push_back(make_check(
            "gram_identity_exact",
            gram_identity_defect(space, exact, ctx.cfg.threads).max_abs_defect,
            1e-10));
        auto batch = std::make_shared<PathBatch>(PathBatch::sample(
            grid, ctx.cfg.samples, ctx.cfg.seed, ctx.enlargement));
        const auto mc = ExpectationEngine::monte_carlo(batch);
        checks.push_back(make_check(
            "gram_mc_sigmas",
            gram_identity_defect(space, mc, ctx.cfg.threads).max_sigmas, 4.0));
    }

    // Projection identity and variational checks per polynomial benchmark.
    for (const char* benchmark_id : {"bm", "bm_squared", "const_driver"}) {
        const std::string name(benchmark_id);
        const BenchmarkCase bench = benchmark(name, ctx.cfg.horizon);
        const StepProcessSolution solution =
            solve_linear(bench.problem, ctx.cfg.level, ctx.cfg.degree, exact,
                         ctx.enlargement, ctx.cfg.threads);
        const auto proj_y = direct_projection(bench.oracle.y, *solution.space,
                                              exact, ctx.cfg.threads);
        const auto proj_z = direct_projection(bench.oracle.z, *solution.space,
                                              exact, ctx.cfg.threads);
        double defect = 0.0;
        for (std::size_t a = 0; a < solution.space->size(); ++a) {
            defect = std::max(defect,
                              std::abs(solution.table.alpha[a] - proj_y[a].value));
            defect = std::max(defect,
                              std::abs(solution.table.beta[a] - proj_z[a].value));
        }
        checks.push_back(make_check("projection_" + name, defect, 1e-10));

        const auto triples =
            member_triples(solution.space, mix_seed(ctx.cfg.seed, 77), 5);
        double residual = 0.0;
        double oracle_residual = 0.0;
        for (const auto& triple : triples) {
            residual = std::max(residual,
                                std::abs(variational_residual(
                                    solution, triple, bench.problem, exact)));
            oracle_residual = std::max(
                oracle_residual,
                std::abs(closed_form_residual(bench.oracle, triple, bench.problem,
                                              exact)
                             .value));
        }
        checks.push_back(make_check("variational_" + name, residual, 1e-10));
        checks.push_back(make_check("closed_form_" + name, oracle_residual, 1e-10));
    }

    {
        std::ofstream csv(ctx.out_dir / "validate.csv");
        csv << "check,max_defect,tolerance,pass\n";
        for (const auto& c : checks) {
            csv << c.name << ',' << format_double(c.max_defect) << ','
                << format_double(c.tolerance) << ',' << (c.pass ? 1 : 0) << '\n';
        }
    }
    json j = base_summary(ctx);
    j["level"] = ctx.cfg.level;
    int failures = 0;
    for (const auto& c : checks) failures += c.pass ? 0 : 1;
    j["checks"] = checks.size();
    j["failures"] = failures;
    j["outputs"] = {"validate.csv"};
    write_summary(ctx, j);

    for (const auto& c : checks) {
        out << (c.pass ? "[PASS] " : "[FAIL] ") << c.name
            << " defect=" << format_double(c.max_defect)
            << " tolerance=" << format_double(c.tolerance) << '\n';
    }
    return failures == 0 ? 0 : 1;
}

int run_selftest(RunContext& ctx, std::ostream& out) {
    std::vector<Check> checks;
    const ExpectationEngine exact = ExpectationEngine::exact();

    {
        const DyadicGrid grid(2, 1.0);
        double defect = 0.0;
        for (double tau : {0.0, 0.3, 0.5, 1.0}) {
            double sum = 0.0;
            for (std::size_t k = 0; k < grid.block_count(); ++k) {
                sum += grid.clip_weight(k, tau);
            }
            defect = std::max(defect, std::abs(sum - tau));
        }
        checks.push_back(make_check("clip_weight_telescoping", defect, 1e-15));
    }
    checks.push_back(
        make_check("hermite_recurrence",
                   std::abs(hermite_eval(3, 1.0) + 2.0), 1e-15));
    {
        const DyadicGrid grid(3, 1.0);
        const FiniteElementSpace space(grid, 2, false);
        checks.push_back(make_check(
            "gram_identity_exact",
            gram_identity_defect(space, exact, ctx.cfg.threads).max_abs_defect,
            1e-10));
    }
    {
        const BenchmarkCase bench = benchmark("bm", 1.0);
        const StepProcessSolution solution =
            solve_linear(bench.problem, 3, 1, exact, false, ctx.cfg.threads);
        const ErrorEstimate err = l2_error_exact(solution, bench.oracle);
        checks.push_back(make_check("bm_z_exact", err.z_error2, 1e-10));
    }

    int failures = 0;
    for (const auto& c : checks) {
        failures += c.pass ? 0 : 1;
        out << (c.pass ? "[PASS] " : "[FAIL] ") << c.name
            << " defect=" << format_double(c.max_defect) << '\n';
    }
    out << (failures == 0 ? "selftest passed\n" : "selftest FAILED\n");
    return failures == 0 ? 0 : 1;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out,
             std::ostream& err) {
    CliConfig cfg;
    bool list_benchmarks = false;
    std::string config_path;

    CLI::App app{"finite transposition BSDE solver"};
    app.add_flag("--list-benchmarks", list_benchmarks,
                 "list the benchmark registry and exit");
    app.add_option("--config", config_path, "flat key=value config file");

    CLI::App* solve = app.add_subcommand("solve", "solve one benchmark problem");
    CLI::App* convergence =
        app.add_subcommand("convergence", "error study over a level range");
    CLI::App* validate =
        app.add_subcommand("validate", "projection and variational checks");
    CLI::App* selftest = app.add_subcommand("selftest", "quick invariant battery");

    std::string levels_text;
    for (CLI::App* sub : {solve, convergence, validate, selftest}) {
        sub->add_option("--benchmark", cfg.benchmark_name, "registry name");
        sub->add_option("--level", cfg.level, "grid refinement level N");
        sub->add_option("--levels", levels_text, "level range A:B");
        sub->add_option("--degree", cfg.degree, "chaos degree truncation d");
        sub->add_option("--engine", cfg.engine, "exact | mc")
            ->check(CLI::IsMember({"exact", "mc"}));
        sub->add_option("--samples", cfg.samples, "Monte Carlo path count");
        sub->add_option("--seed", cfg.seed, "base RNG seed");
        sub->add_flag("--enlargement", cfg.enlargement,
                      "enlarge the filtration by an independent Gaussian");
        sub->add_option("--horizon", cfg.horizon, "time horizon T");
        sub->add_option("--output-dir", cfg.output_dir, "report directory");
        sub->add_option("--threads", cfg.threads, "worker threads");
        sub->add_flag("--no-timing", cfg.no_timing,
                      "write 0 for wall_ms so reruns are byte-identical");
    }
    solve->add_option("--dump-basis", cfg.dump_basis_path,
                      "write the basis description to a file");
    solve->add_option("--dump-paths", cfg.dump_paths_path,
                      "write the solver batch to a binary file (mc engine)");

    // Two-pass parse: the first pass only finds --config so file values sit
    // between the defaults and the flags.
    std::vector<std::string> argv_copy = args;
    try {
        for (std::size_t i = 0; i < args.size(); ++i) {
            if (args[i] == "--config" && i + 1 < args.size()) {
                load_config_file(cfg, args[i + 1]);
            } else if (args[i].rfind("--config=", 0) == 0) {
                load_config_file(cfg, args[i].substr(9));
            }
        }
        std::reverse(argv_copy.begin(), argv_copy.end());  // CLI11 takes reversed argv
        app.parse(argv_copy);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const ConfigError& e) {
        err << "error: " << e.message << '\n';
        return 2;
    }

    if (list_benchmarks) {
        for (const auto& name : benchmark_names()) {
            out << name << ": " << benchmark(name).description << '\n';
        }
        return 0;
    }

    CLI::App* active = nullptr;
    for (CLI::App* sub : {solve, convergence, validate, selftest}) {
        if (sub->parsed()) active = sub;
    }
    if (!active) {
        err << "error: expected a subcommand: solve, convergence, validate, selftest\n";
        return 2;
    }
    cfg.command = active->get_name();

    try {
        if (!levels_text.empty()) {
            const auto colon = levels_text.find(':');
            if (colon == std::string::npos) {
                throw ConfigError{"--levels must look like A:B"};
            }
            cfg.levels_lo = std::stoi(levels_text.substr(0, colon));
            cfg.levels_hi = std::stoi(levels_text.substr(colon + 1));
        }
        if (cfg.output_dir.empty()) {
            if (const char* env = std::getenv("FINTRA_OUTPUT_DIR")) {
                cfg.output_dir = env;
            } else {
                cfg.output_dir = "fintra_out";
            }
        }
        if (cfg.threads < 1) throw ConfigError{"--threads must be >= 1"};

        RunContext ctx{cfg, std::filesystem::path(cfg.output_dir),
                       benchmark(cfg.benchmark_name, cfg.horizon), false};
        ctx.enlargement = cfg.enlargement || ctx.bench.enlargement;
        std::filesystem::create_directories(ctx.out_dir);

        if (cfg.command == "solve") return run_solve(ctx, out);
        if (cfg.command == "convergence") return run_convergence(ctx, out);
        if (cfg.command == "validate") return run_validate(ctx, out);
        return run_selftest(ctx, out);
    } catch (const ConfigError& e) {
        err << "error: " << e.message << '\n';
        return 2;
    } catch (const std::out_of_range& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const unsupported_data_error& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        err << "internal error: " << e.what() << '\n';
        return 2;
    }
}

}  // namespace fintra
