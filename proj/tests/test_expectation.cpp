#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "fintra/expectation.hpp"
#include "fintra/rng.hpp"

using namespace fintra;

TEST_CASE("pairwise_sum agrees with naive summation") {
    std::vector<double> values;
    double plain = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double v = gaussian_draw(3, i, 0, RngDomain::increment);
        values.push_back(v);
        plain += v;
    }
    CHECK(pairwise_sum(values) == doctest::Approx(plain).epsilon(1e-12));
}

TEST_CASE("mc_expect of a constant has zero standard error") {
    const std::vector<double> values(1000, 3.0);
    const Expectation e = mc_expect(values);
    CHECK(e.value == 3.0);
    CHECK(e.std_error == 0.0);
}

TEST_CASE("mc_expect names the path holding a non-finite value") {
    std::vector<double> values(10, 1.0);
    values[7] = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_WITH_AS(mc_expect(values), "mc_expect: non-finite value at path 7",
                         std::domain_error);
    CHECK_THROWS_AS(mc_expect(std::vector<double>{}), std::invalid_argument);
}

TEST_CASE("mc_expect estimates Brownian moments") {
    const DyadicGrid grid(3, 1.0);
    const PathBatch batch = sample_paths(grid, 100000, 99);
    const Expectation mean = mc_expect(batch, [&](std::size_t p) {
        return batch.brownian(p, grid.block_count());
    });
    CHECK(std::abs(mean.value) <= 4.0 * mean.std_error);
    const Expectation second = mc_expect(batch, [&](std::size_t p) {
        const double w = batch.brownian(p, grid.block_count());
        return w * w;
    });
    CHECK(std::abs(second.value - 1.0) <= 4.0 * second.std_error);
}

TEST_CASE("chaos_to_poly round-trips against eval_h") {
    int checked = 0;
    for (int block : {0, 1, 2, 4}) {
        for (bool enl : {false, true}) {
            for (const auto& h : enumerate_block_basis(2, 1.7, block, 3, enl)) {
                std::vector<double> coords(block);
                for (int j = 0; j < block; ++j) {
                    coords[j] = gaussian_draw(7, checked, j, RngDomain::increment);
                }
                const double xi =
                    gaussian_draw(7, checked, 100, RngDomain::enlargement);
                PathCoords pc{coords, std::nullopt};
                if (enl) pc.enlargement = xi;
                const double direct = eval_h(h, pc);
                const double via_poly =
                    chaos_to_poly(h).eval([&](GaussianPolynomial::Coord c) {
                        if (c == GaussianPolynomial::kEnlargement) return xi;
                        return coords[static_cast<std::size_t>(c)];
                    });
                CHECK(via_poly ==
                      doctest::Approx(direct).epsilon(1e-12).scale(1.0));
                ++checked;
            }
        }
    }
    CHECK(checked >= 50);
}

TEST_CASE("Hermite squared norms from two independent routes") {
    // E[He_2(x)^2] = 2! by orthogonality; the moment expansion gives
    // E[x^4 - 2x^2 + 1] = 3 - 2 + 1.
    const auto he2 = [] {
        GaussianPolynomial p;
        p.add_term({{0, 2}}, 1.0);
        p.add_term({}, -1.0);
        return p;
    }();
    CHECK(expect_product(he2, he2) == doctest::Approx(2.0));
    // (x^2-1)^2 = x^4 - 2x^2 + 1: E = 3 - 2 + 1 = 2.
    const auto expanded = poly_mul(he2, he2);
    CHECK(exact_expect(expanded) == doctest::Approx(2.0));
}

TEST_CASE("the engines agree on random polynomials") {
    const DyadicGrid grid(2, 1.0);
    auto batch =
        std::make_shared<PathBatch>(PathBatch::sample(grid, 1 << 16, 2718, true));
    const auto mc = ExpectationEngine::monte_carlo(batch);
    const auto exact = ExpectationEngine::exact();
    int nontrivial = 0;
    for (int r = 0; r < 55; ++r) {
        GaussianPolynomial p;
        // Random polynomial of degree <= 6 in the four increments and xi.
        for (int t = 0; t < 5; ++t) {
            std::vector<std::pair<GaussianPolynomial::Coord, int>> powers;
            int degree_left = 6;
            for (GaussianPolynomial::Coord c :
                 {GaussianPolynomial::Coord{0}, GaussianPolynomial::Coord{1},
                  GaussianPolynomial::Coord{2}, GaussianPolynomial::Coord{3},
                  GaussianPolynomial::kEnlargement}) {
                const double u = gaussian_draw(1234, 10 * r + t,
                                               static_cast<std::uint32_t>(c + 10),
                                               RngDomain::increment);
                const int pw =
                    static_cast<int>(std::floor(std::abs(u))) % (degree_left + 1);
                if (pw > 0) {
                    powers.emplace_back(c, pw);
                    degree_left -= pw;
                }
            }
            p.add_term(std::move(powers),
                       gaussian_draw(1234, 10 * r + t, 999, RngDomain::increment));
        }
        const Expectation sampled = mc.expect(p);
        const Expectation truth = exact.expect(p);
        CHECK(truth.std_error == 0.0);
        if (sampled.std_error > 0.0) {
            CHECK(std::abs(sampled.value - truth.value) <= 4.0 * sampled.std_error);
            ++nontrivial;
        } else {
            CHECK(sampled.value == doctest::Approx(truth.value).epsilon(1e-12));
        }
    }
    CHECK(nontrivial >= 50);
}

TEST_CASE("Monte Carlo expectation is linear in the integrand") {
    const DyadicGrid grid(1, 1.0);
    auto batch =
        std::make_shared<PathBatch>(PathBatch::sample(grid, 4096, 10, false));
    const auto mc = ExpectationEngine::monte_carlo(batch);
    GaussianPolynomial p;
    p.add_term({{0, 2}}, 1.0);
    GaussianPolynomial q;
    q.add_term({{1, 1}}, 1.0);
    q.add_term({}, 0.5);
    const double a = 2.0, b = -3.0;
    const Expectation combined = mc.expect(a * p + b * q);
    const Expectation separate_p = mc.expect(p);
    const Expectation separate_q = mc.expect(q);
    CHECK(combined.value ==
          doctest::Approx(a * separate_p.value + b * separate_q.value)
              .epsilon(1e-12));
}

TEST_CASE("SymbolicContext.brownian carries the right variance") {
    const SymbolicContext ctx{DyadicGrid(2, 1.0), false};
    for (double t : {0.25, 0.5, 1.0}) {
        const auto w = ctx.brownian(t);
        CHECK(expect_product(w, w) == doctest::Approx(t).epsilon(1e-13));
    }
    // Inside a block the bridge coordinate supplies the remainder.
    for (double t : {0.1, 0.3, 0.99}) {
        const auto w = ctx.brownian(t);
        CHECK(expect_product(w, w) == doctest::Approx(t).epsilon(1e-13));
        CHECK(exact_expect(w) == 0.0);
    }
    CHECK_THROWS_AS(ctx.brownian(1.5), std::invalid_argument);
    CHECK_THROWS_AS(ctx.enlargement_coordinate(), std::invalid_argument);
    const SymbolicContext enl{DyadicGrid(1, 1.0), true};
    const auto xi = enl.enlargement_coordinate();
    CHECK(expect_product(xi, xi) == 1.0);
}

TEST_CASE("exact engine refuses pathwise-only evaluation of the bridge") {
    const DyadicGrid grid(1, 1.0);
    const PathBatch batch = sample_paths(grid, 4, 1);
    const auto bridge = GaussianPolynomial::coordinate(GaussianPolynomial::kBridge);
    CHECK_THROWS_AS(eval_poly_on_path(bridge, batch, 0, 1), std::invalid_argument);
}
