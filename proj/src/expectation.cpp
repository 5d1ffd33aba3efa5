#include "fintra/expectation.hpp"

#include <cmath>
#include <string>
#include <vector>

namespace fintra {

double pairwise_sum(std::span<const double> values) {
    if (values.size() <= 8) {
        double s = 0.0;
        for (double v : values) s += v;
        return s;
    }
    const std::size_t half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

Expectation mc_expect(std::span<const double> pathwise_values) {
    if (pathwise_values.empty()) {
        throw std::invalid_argument("mc_expect: empty sample");
    }
    bool all_equal = true;
    for (std::size_t p = 0; p < pathwise_values.size(); ++p) {
        const double v = pathwise_values[p];
        if (!std::isfinite(v)) {
            throw std::domain_error("mc_expect: non-finite value at path " +
                                    std::to_string(p));
        }
        if (v != pathwise_values[0]) all_equal = false;
    }
    if (all_equal) return {pathwise_values[0], 0.0};
    const double n = static_cast<double>(pathwise_values.size());
    const double mean = pairwise_sum(pathwise_values) / n;
    std::vector<double> sq(pathwise_values.size());
    for (std::size_t p = 0; p < pathwise_values.size(); ++p) {
        const double d = pathwise_values[p] - mean;
        sq[p] = d * d;
    }
    const double var = pairwise_sum(sq) / (n - 1.0);
    return {mean, std::sqrt(var / n)};
}

Expectation mc_expect(const PathBatch& batch,
                      const std::function<double(std::size_t)>& pathwise) {
    std::vector<double> values(batch.count());
    for (std::size_t p = 0; p < batch.count(); ++p) values[p] = pathwise(p);
    return mc_expect(values);
}

Expectation ExpectationEngine::expect(const GaussianPolynomial& p) const {
    if (is_exact()) return {exact_expect(p), 0.0};
    std::vector<double> values(batch_->count());
    for (std::size_t path = 0; path < batch_->count(); ++path) {
        values[path] = eval_poly_on_path(p, *batch_, path, batch_->grid().level());
    }
    return mc_expect(values);
}

GaussianPolynomial SymbolicContext::increment(std::size_t j) const {
    if (j >= grid.block_count()) {
        throw std::invalid_argument("SymbolicContext::increment: index out of range");
    }
    return GaussianPolynomial::coordinate(
        static_cast<GaussianPolynomial::Coord>(j));
}

GaussianPolynomial SymbolicContext::brownian(double t) const {
    if (!(t >= 0.0) || !(t <= grid.horizon())) {
        throw std::invalid_argument("SymbolicContext::brownian: time outside [0, T]");
    }
    const double sqrt_delta = std::sqrt(grid.block_width());
    GaussianPolynomial w;
    std::size_t l = grid.block_index(t);
    if (t == grid.horizon()) l = grid.block_count();  // all increments
    for (std::size_t j = 0; j < l; ++j) {
        w += sqrt_delta * GaussianPolynomial::coordinate(
                              static_cast<GaussianPolynomial::Coord>(j));
    }
    const double rem = t - grid.time(l);
    if (rem > 0.0) {
        w += std::sqrt(rem) *
             GaussianPolynomial::coordinate(GaussianPolynomial::kBridge);
    }
    return w;
}

GaussianPolynomial SymbolicContext::enlargement_coordinate() const {
    if (!enlargement) {
        throw std::invalid_argument(
            "SymbolicContext: enlargement coordinate requested without enlargement");
    }
    return GaussianPolynomial::coordinate(GaussianPolynomial::kEnlargement);
}

std::vector<double> hermite_coefficients(int n) {
    if (n < 0) throw std::invalid_argument("hermite_coefficients: negative degree");
    std::vector<double> prev{1.0};
    if (n == 0) return prev;
    std::vector<double> cur{0.0, 1.0};
    for (int k = 1; k < n; ++k) {
        std::vector<double> next(k + 2, 0.0);
        for (std::size_t i = 0; i < cur.size(); ++i) next[i + 1] = cur[i];
        for (std::size_t i = 0; i < prev.size(); ++i) {
            next[i] -= static_cast<double>(k) * prev[i];
        }
        prev = std::move(cur);
        cur = std::move(next);
    }
    return cur;
}

GaussianPolynomial chaos_to_poly(const ChaosBasisFunction& h) {
    GaussianPolynomial out = GaussianPolynomial::constant(h.normalization);
    const std::size_t q = h.enlargement ? 1 : 0;
    for (std::size_t slot = 0; slot < h.index.degrees.size(); ++slot) {
        const int m = h.index.degrees[slot];
        if (m == 0) continue;
        const GaussianPolynomial::Coord coord =
            (h.enlargement && slot == 0)
                ? GaussianPolynomial::kEnlargement
                : static_cast<GaussianPolynomial::Coord>(slot - q);
        const auto coeffs = hermite_coefficients(m);
        GaussianPolynomial he;
        for (std::size_t p = 0; p < coeffs.size(); ++p) {
            if (coeffs[p] == 0.0) continue;
            if (p == 0) {
                he.add_term({}, coeffs[p]);
            } else {
                he.add_term({{coord, static_cast<int>(p)}}, coeffs[p]);
            }
        }
        out = poly_mul(out, he);
    }
    return out;
}

double eval_poly_on_path(const GaussianPolynomial& p, const PathBatch& batch,
                         std::size_t path, int level) {
    std::vector<double> coords;
    batch.fill_normalized_at_level(path, level, coords);
    return p.eval([&](GaussianPolynomial::Coord c) -> double {
        if (c >= 0) {
            const std::size_t j = static_cast<std::size_t>(c);
            if (j >= coords.size()) {
                throw std::invalid_argument(
                    "eval_poly_on_path: coordinate beyond grid level");
            }
            return coords[j];
        }
        if (c == GaussianPolynomial::kEnlargement) {
            return batch.enlargement_value(path);
        }
        throw std::invalid_argument(
            "eval_poly_on_path: bridge coordinates have no pathwise value");
    });
}

}  // namespace fintra
