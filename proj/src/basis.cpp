#include "fintra/basis.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

#include "fintra/expectation.hpp"
#include "fintra/parallel.hpp"

namespace fintra {

namespace {

double factorial(int n) {
    double f = 1.0;
    for (int i = 2; i <= n; ++i) f *= static_cast<double>(i);
    return f;
}

void enumerate_exact_degree(std::size_t slots, int degree,
                            std::vector<std::uint8_t>& scratch,
                            std::vector<MultiIndex>& out) {
    if (scratch.size() == slots) {
        if (degree == 0) out.push_back(MultiIndex{scratch});
        return;
    }
    const bool last = scratch.size() + 1 == slots;
    for (int m = degree; m >= 0; --m) {
        if (last && m != degree) break;  // last slot takes the remainder
        scratch.push_back(static_cast<std::uint8_t>(last ? degree : m));
        enumerate_exact_degree(slots, last ? 0 : degree - m, scratch, out);
        scratch.pop_back();
    }
}

}  // namespace

ChaosBasisFunction make_chaos_function(int grid_level, double horizon, int block,
                                       bool enlargement, MultiIndex index) {
    const std::size_t slots = static_cast<std::size_t>(block) + (enlargement ? 1 : 0);
    if (index.degrees.size() != slots) {
        throw std::invalid_argument("make_chaos_function: index has " +
                                    std::to_string(index.degrees.size()) +
                                    " slots, block " + std::to_string(block) +
                                    " needs " + std::to_string(slots));
    }
    double norm_sq = 1.0;
    for (auto m : index.degrees) norm_sq *= factorial(m);
    ChaosBasisFunction h;
    h.grid_level = grid_level;
    h.horizon = horizon;
    h.block = block;
    h.enlargement = enlargement;
    h.index = std::move(index);
    h.normalization = std::sqrt(std::ldexp(1.0, grid_level) / horizon) / std::sqrt(norm_sq);
    return h;
}

double hermite_eval(int n, double x) {
    if (n < 0) throw std::invalid_argument("hermite_eval: negative degree");
    if (n == 0) return 1.0;
    double prev = 1.0;  // He_0
    double cur = x;     // He_1
    for (int k = 1; k < n; ++k) {
        const double next = x * cur - static_cast<double>(k) * prev;
        prev = cur;
        cur = next;
    }
    return cur;
}

double eval_h(const ChaosBasisFunction& h, const PathCoords& coords) {
    const std::size_t q = h.enlargement ? 1 : 0;
    double v = h.normalization;
    for (std::size_t slot = 0; slot < h.index.degrees.size(); ++slot) {
        const int m = h.index.degrees[slot];
        if (m == 0) continue;
        double x;
        if (h.enlargement && slot == 0) {
            if (!coords.enlargement) {
                throw std::invalid_argument("eval_h: enlargement coordinate missing");
            }
            x = *coords.enlargement;
        } else {
            const std::size_t j = slot - q;
            if (j >= coords.increments.size()) {
                throw std::invalid_argument("eval_h: increment coordinate " +
                                            std::to_string(j) + " missing");
            }
            x = coords.increments[j];
        }
        v *= hermite_eval(m, x);
    }
    return v;
}

std::vector<ChaosBasisFunction> enumerate_block_basis(int grid_level, double horizon,
                                                      int block, int max_degree,
                                                      bool enlargement) {
    if (block < 0 || max_degree < 0) {
        throw std::invalid_argument("enumerate_block_basis: negative block or degree");
    }
    const std::size_t slots = static_cast<std::size_t>(block) + (enlargement ? 1 : 0);
    std::vector<MultiIndex> indices;
    std::vector<std::uint8_t> scratch;
    for (int g = 0; g <= max_degree; ++g) {
        if (slots == 0) {
            if (g == 0) indices.push_back(MultiIndex{});
            continue;
        }
        enumerate_exact_degree(slots, g, scratch, indices);
    }
    std::vector<ChaosBasisFunction> out;
    out.reserve(indices.size());
    for (auto& idx : indices) {
        out.push_back(make_chaos_function(grid_level, horizon, block, enlargement,
                                          std::move(idx)));
    }
    return out;
}

double eval_e(const SimpleProcessBasisElement& e, double t, const PathCoords& coords) {
    if (!(t >= 0.0) || !(t <= e.h.horizon)) {
        throw std::invalid_argument("eval_e: time outside [0, T]");
    }
    const bool inside =
        t >= e.t_begin && (t < e.t_end || (e.closes_at_horizon && t <= e.t_end));
    if (!inside) return 0.0;
    return eval_h(e.h, coords);
}

FiniteElementSpace::FiniteElementSpace(const DyadicGrid& grid, int degree,
                                       bool enlargement)
    : grid_(grid), degree_(degree), enlargement_(enlargement) {
    if (degree < 0) {
        throw std::invalid_argument("FiniteElementSpace: degree must be >= 0");
    }
    block_offsets_.reserve(grid.block_count() + 1);
    block_offsets_.push_back(0);
    for (std::size_t k = 0; k < grid.block_count(); ++k) {
        auto functions = enumerate_block_basis(grid.level(), grid.horizon(),
                                               static_cast<int>(k), degree,
                                               enlargement);
        for (auto& h : functions) {
            SimpleProcessBasisElement e;
            e.h = std::move(h);
            e.t_begin = grid.time(k);
            e.t_end = grid.time(k + 1);
            e.closes_at_horizon = (k + 1 == grid.block_count());
            elements_.push_back(std::move(e));
        }
        block_offsets_.push_back(elements_.size());
    }
}

const SimpleProcessBasisElement& FiniteElementSpace::element(std::size_t flat) const {
    if (flat >= elements_.size()) {
        throw std::invalid_argument("FiniteElementSpace::element: index out of range");
    }
    return elements_[flat];
}

std::span<const SimpleProcessBasisElement> FiniteElementSpace::block_elements(
    std::size_t k) const {
    if (k >= grid_.block_count()) {
        throw std::invalid_argument("FiniteElementSpace::block_elements: bad block");
    }
    return {elements_.data() + block_offsets_[k],
            block_offsets_[k + 1] - block_offsets_[k]};
}

std::size_t FiniteElementSpace::block_begin(std::size_t k) const {
    if (k >= grid_.block_count()) {
        throw std::invalid_argument("FiniteElementSpace::block_begin: bad block");
    }
    return block_offsets_[k];
}

std::size_t FiniteElementSpace::block_size(std::size_t k) const {
    if (k >= grid_.block_count()) {
        throw std::invalid_argument("FiniteElementSpace::block_size: bad block");
    }
    return block_offsets_[k + 1] - block_offsets_[k];
}

std::pair<std::size_t, std::size_t> FiniteElementSpace::locate(std::size_t flat) const {
    if (flat >= elements_.size()) {
        throw std::invalid_argument("FiniteElementSpace::locate: index out of range");
    }
    const auto it =
        std::upper_bound(block_offsets_.begin(), block_offsets_.end(), flat);
    const std::size_t k = static_cast<std::size_t>(it - block_offsets_.begin()) - 1;
    return {k, flat - block_offsets_[k] + 1};
}

namespace {

// Same-block inner product E int <e_a, e_b> dtau = delta * E[h_a h_b].
Expectation block_pair_inner(const FiniteElementSpace& space,
                             const ExpectationEngine& engine, std::size_t a,
                             std::size_t b,
                             const std::vector<std::vector<double>>* mc_values,
                             std::vector<double>& scratch) {
    const double delta = space.grid().block_width();
    if (engine.is_exact()) {
        const auto pa = chaos_to_poly(space.element(a).h);
        const auto pb = chaos_to_poly(space.element(b).h);
        return {delta * expect_product(pa, pb), 0.0};
    }
    const auto& va = (*mc_values)[a];
    const auto& vb = (*mc_values)[b];
    scratch.resize(va.size());
    for (std::size_t p = 0; p < va.size(); ++p) scratch[p] = va[p] * vb[p];
    Expectation e = mc_expect(scratch);
    e.value *= delta;
    e.std_error *= delta;
    return e;
}

// Evaluates every basis function on every path of the engine's batch.
std::vector<std::vector<double>> evaluate_all_mc(const FiniteElementSpace& space,
                                                 const ExpectationEngine& engine) {
    const PathBatch& batch = engine.batch();
    if (batch.grid().level() < space.grid().level() ||
        batch.grid().horizon() != space.grid().horizon()) {
        throw std::invalid_argument(
            "gram: batch must live on the space's horizon at the same or finer level");
    }
    std::vector<std::vector<double>> values(space.size());
    for (auto& v : values) v.resize(batch.count());
    std::vector<double> coords;
    for (std::size_t p = 0; p < batch.count(); ++p) {
        batch.fill_normalized_at_level(p, space.grid().level(), coords);
        PathCoords pc{coords, std::nullopt};
        if (space.enlargement()) pc.enlargement = batch.enlargement_value(p);
        for (std::size_t a = 0; a < space.size(); ++a) {
            values[a][p] = eval_h(space.element(a).h, pc);
        }
    }
    return values;
}

}  // namespace

std::vector<double> gram_matrix(const FiniteElementSpace& space,
                                const ExpectationEngine& engine) {
    const std::size_t n = space.size();
    std::vector<double> g(n * n, 0.0);
    std::vector<std::vector<double>> mc_values;
    if (!engine.is_exact()) mc_values = evaluate_all_mc(space, engine);
    std::vector<double> scratch;
    for (std::size_t k = 0; k < space.grid().block_count(); ++k) {
        const std::size_t lo = space.block_begin(k);
        const std::size_t hi = lo + space.block_size(k);
        for (std::size_t a = lo; a < hi; ++a) {
            for (std::size_t b = a; b < hi; ++b) {
                const Expectation e = block_pair_inner(
                    space, engine, a, b, engine.is_exact() ? nullptr : &mc_values,
                    scratch);
                g[a * n + b] = e.value;
                g[b * n + a] = e.value;
            }
        }
    }
    return g;
}

GramDefect gram_identity_defect(const FiniteElementSpace& space,
                                const ExpectationEngine& engine, int threads) {
    const double delta = space.grid().block_width();
    GramDefect defect;
    if (engine.is_exact()) {
        // Cross-block entries vanish through disjoint time supports; only
        // same-block pairs carry information.
        const std::size_t blocks = space.grid().block_count();
        std::vector<double> per_block(blocks, 0.0);
        parallel_for(blocks, threads, [&](std::size_t k) {
            const std::size_t lo = space.block_begin(k);
            const std::size_t hi = lo + space.block_size(k);
            std::vector<GaussianPolynomial> polys;
            polys.reserve(hi - lo);
            for (std::size_t a = lo; a < hi; ++a) {
                polys.push_back(chaos_to_poly(space.element(a).h));
            }
            double worst = 0.0;
            for (std::size_t a = lo; a < hi; ++a) {
                for (std::size_t b = a; b < hi; ++b) {
                    const double entry = delta * expect_product(polys[a - lo], polys[b - lo]);
                    const double target = a == b ? 1.0 : 0.0;
                    worst = std::max(worst, std::abs(entry - target));
                }
            }
            per_block[k] = worst;
        });
        for (double w : per_block) defect.max_abs_defect = std::max(defect.max_abs_defect, w);
        return defect;
    }
    const auto mc_values = evaluate_all_mc(space, engine);
    std::vector<double> scratch;
    for (std::size_t k = 0; k < space.grid().block_count(); ++k) {
        const std::size_t lo = space.block_begin(k);
        const std::size_t hi = lo + space.block_size(k);
        for (std::size_t a = lo; a < hi; ++a) {
            for (std::size_t b = a; b < hi; ++b) {
                const Expectation e =
                    block_pair_inner(space, engine, a, b, &mc_values, scratch);
                const double target = a == b ? 1.0 : 0.0;
                const double abs_defect = std::abs(e.value - target);
                defect.max_abs_defect = std::max(defect.max_abs_defect, abs_defect);
                if (a == b) continue;
                if (e.std_error > 0.0) {
                    defect.max_sigmas =
                        std::max(defect.max_sigmas, abs_defect / e.std_error);
                } else if (abs_defect > 0.0) {
                    defect.max_sigmas = std::numeric_limits<double>::infinity();
                }
            }
        }
    }
    return defect;
}

void dump_basis(const FiniteElementSpace& space, std::ostream& os) {
    char buf[64];
    for (std::size_t flat = 0; flat < space.size(); ++flat) {
        const auto [k, i] = space.locate(flat);
        const auto& h = space.element(flat).h;
        os << "k=" << k << " i=" << i << " degrees=[";
        for (std::size_t s = 0; s < h.index.degrees.size(); ++s) {
            if (s) os << ',';
            os << static_cast<int>(h.index.degrees[s]);
        }
        std::snprintf(buf, sizeof(buf), "%.17g", h.normalization);
        os << "] c=" << buf << '\n';
    }
}

}  // namespace fintra
