#include <doctest.h>

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "fintra/rng.hpp"
#include "fintra/sampling.hpp"

using namespace fintra;

TEST_CASE("philox4x32 matches an independent reference implementation") {
    // Vectors computed with a separate transliteration of the algorithm
    // (10 rounds, multipliers 0xD2511F53/0xCD9E8D57, Weyl 0x9E3779B9/0xBB67AE85).
    const auto zero = philox4x32({0, 0, 0, 0}, {0, 0});
    CHECK(zero == std::array<std::uint32_t, 4>{0x6627e8d5u, 0xe169c58du,
                                               0xbc57ac4cu, 0x9b00dbd8u});
    const auto mixed = philox4x32({1, 2, 3, 4}, {5, 6});
    CHECK(mixed == std::array<std::uint32_t, 4>{0xc0c839bcu, 0x889c87c5u,
                                                0x61986739u, 0x2d4623d0u});
    const auto ones = philox4x32({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                 {0xffffffffu, 0xffffffffu});
    CHECK(ones == std::array<std::uint32_t, 4>{0x408f276du, 0x41c83b0eu,
                                               0xa20bc7c6u, 0x6d5451fdu});
}

TEST_CASE("gaussian_draw is a deterministic function of its key") {
    const double a = gaussian_draw(42, 7, 3, RngDomain::increment);
    CHECK(a == gaussian_draw(42, 7, 3, RngDomain::increment));
    CHECK(a != gaussian_draw(43, 7, 3, RngDomain::increment));
    CHECK(a != gaussian_draw(42, 8, 3, RngDomain::increment));
    CHECK(a != gaussian_draw(42, 7, 4, RngDomain::increment));
    CHECK(a != gaussian_draw(42, 7, 3, RngDomain::enlargement));
    CHECK(std::isfinite(a));
}

TEST_CASE("gaussian_draw moments look standard normal") {
    const std::size_t n = 200000;
    double sum = 0.0, sum2 = 0.0, sum4 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double x = gaussian_draw(5, i, 0, RngDomain::increment);
        sum += x;
        sum2 += x * x;
        sum4 += x * x * x * x;
    }
    CHECK(std::abs(sum / n) < 5.0 / std::sqrt(static_cast<double>(n)));
    CHECK(sum2 / n == doctest::Approx(1.0).epsilon(0.02));
    CHECK(sum4 / n == doctest::Approx(3.0).epsilon(0.05));
}

TEST_CASE("sample_paths is reproducible and path-subset stable") {
    const DyadicGrid grid(3, 1.0);
    const PathBatch a = sample_paths(grid, 100, 123);
    const PathBatch b = sample_paths(grid, 100, 123);
    const PathBatch small = sample_paths(grid, 17, 123);
    for (std::size_t p = 0; p < 17; ++p) {
        for (std::size_t j = 0; j < grid.block_count(); ++j) {
            CHECK(a.increment(p, j) == b.increment(p, j));
            CHECK(a.increment(p, j) == small.increment(p, j));
        }
    }
    const PathBatch other = sample_paths(grid, 100, 124);
    CHECK(a.increment(0, 0) != other.increment(0, 0));
    CHECK_THROWS_AS(sample_paths(grid, 0, 1), std::invalid_argument);
}

TEST_CASE("increment columns pass the distribution smoke test") {
    const DyadicGrid grid(2, 1.0);
    const std::size_t S = 100000;
    const PathBatch batch = sample_paths(grid, S, 2024);
    const double delta = grid.block_width();
    for (std::size_t j = 0; j < grid.block_count(); ++j) {
        double mean = 0.0;
        for (std::size_t p = 0; p < S; ++p) mean += batch.increment(p, j);
        mean /= static_cast<double>(S);
        CHECK(std::abs(mean) <=
              5.0 / std::sqrt(static_cast<double>(S)) * std::sqrt(delta));
        double var = 0.0;
        for (std::size_t p = 0; p < S; ++p) {
            const double d = batch.increment(p, j) - mean;
            var += d * d;
        }
        var /= static_cast<double>(S - 1);
        const double slack = 10.0 / std::sqrt(static_cast<double>(S));
        CHECK(var >= delta * (1.0 - slack));
        CHECK(var <= delta * (1.0 + slack));
        // Monte Carlo variance check from the examples: within 3% at this S.
        CHECK(var == doctest::Approx(0.25).epsilon(0.03));
    }
}

TEST_CASE("enlargement column is present only when requested") {
    const DyadicGrid grid(1, 1.0);
    const PathBatch with = sample_paths(grid, 10, 5, true);
    const PathBatch without = sample_paths(grid, 10, 5, false);
    CHECK(with.has_enlargement());
    CHECK(!without.has_enlargement());
    CHECK(std::isfinite(with.enlargement_value(3)));
    CHECK_THROWS_AS(without.enlargement_value(0), std::invalid_argument);
    // Independent of the increments: same seed gives the same increments.
    CHECK(with.increment(2, 1) == without.increment(2, 1));
}

TEST_CASE("brownian_value sums increments") {
    const DyadicGrid grid(1, 1.0);
    const PathBatch batch =
        PathBatch::from_increments(grid, {0.1, -0.2}, std::nullopt);
    CHECK(brownian_value(batch, 0, 0.0) == 0.0);
    CHECK(brownian_value(batch, 0, 0.5) == doctest::Approx(0.1));
    CHECK(brownian_value(batch, 0, 1.0) == doctest::Approx(-0.1));
    CHECK_THROWS_AS(brownian_value(batch, 0, 0.3), std::invalid_argument);

    const PathBatch sampled = sample_paths(grid, 4, 9);
    const double total = sampled.increment(2, 0) + sampled.increment(2, 1);
    CHECK(brownian_value(sampled, 2, 1.0) == total);
}

TEST_CASE("coarsen sums fine increments and preserves shared Brownian values") {
    const DyadicGrid fine(2, 1.0);
    const PathBatch batch =
        PathBatch::from_increments(fine, {0.1, 0.2, -0.3, 0.4}, std::nullopt);
    const PathBatch coarse = coarsen(batch, 1);
    CHECK(coarse.grid().level() == 1);
    CHECK(coarse.increment(0, 0) == doctest::Approx(0.3));
    CHECK(coarse.increment(0, 1) == doctest::Approx(0.1));

    const PathBatch same = coarsen(batch, 2);
    CHECK(same.increment(0, 3) == batch.increment(0, 3));
    CHECK_THROWS_AS(coarsen(batch, 3), std::invalid_argument);

    // The first coarse increment is the same left-to-right prefix sum the
    // fine batch uses, so w(1/2) survives coarsening bit for bit. Later
    // times regroup the additions and may move by a few ulps.
    const PathBatch deep = sample_paths(DyadicGrid(3, 1.0), 6, 77);
    const PathBatch to1 = coarsen(deep, 1);
    for (std::size_t p = 0; p < 6; ++p) {
        CHECK(brownian_value(deep, p, 0.5) == brownian_value(to1, p, 0.5));
        CHECK(brownian_value(deep, p, 1.0) ==
              doctest::Approx(brownian_value(to1, p, 1.0)).epsilon(1e-14));
    }
}

TEST_CASE("fill_normalized_at_level matches coarsen") {
    const PathBatch deep = sample_paths(DyadicGrid(4, 2.0), 5, 31);
    const PathBatch coarse = coarsen(deep, 2);
    std::vector<double> got;
    for (std::size_t p = 0; p < 5; ++p) {
        deep.fill_normalized_at_level(p, 2, got);
        REQUIRE(got.size() == 4);
        for (std::size_t j = 0; j < 4; ++j) {
            CHECK(got[j] == doctest::Approx(coarse.normalized(p, j)).epsilon(1e-15));
        }
    }
}

TEST_CASE("path dump round-trips with the documented header") {
    const DyadicGrid grid(1, 1.0);
    const PathBatch batch =
        PathBatch::from_increments(grid, {0.25, -0.5, 1.0, 2.0}, std::nullopt);
    std::ostringstream os(std::ios::binary);
    write_path_dump(batch, os);
    const std::string bytes = os.str();
    REQUIRE(bytes.size() == 8 + 4 * sizeof(double));
    // uint32 level, uint32 count, little endian.
    CHECK(static_cast<unsigned char>(bytes[0]) == 1);
    CHECK(static_cast<unsigned char>(bytes[1]) == 0);
    CHECK(static_cast<unsigned char>(bytes[4]) == 2);

    std::istringstream is(bytes, std::ios::binary);
    const PathBatch back = read_path_dump(is, 1.0);
    CHECK(back.count() == 2);
    CHECK(back.grid().level() == 1);
    for (std::size_t p = 0; p < 2; ++p) {
        for (std::size_t j = 0; j < 2; ++j) {
            CHECK(back.increment(p, j) == batch.increment(p, j));
        }
    }
}
