#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "fintra/time_grid.hpp"

namespace fintra {

class ExpectationEngine;

// Normalized Gaussian coordinates of one path: the unit-variance increments
// at some grid level, plus the enlargement variable when the filtration
// carries one.
struct PathCoords {
    std::span<const double> increments;
    std::optional<double> enlargement;
};

// Exponents of one product of Hermite polynomials. Slot 0 is the
// enlargement variable when present; the remaining slots are the normalized
// increments 0 .. k-1 of the block the function belongs to.
struct MultiIndex {
    std::vector<std::uint8_t> degrees;

    int total_degree() const {
        int d = 0;
        for (auto m : degrees) d += m;
        return d;
    }
    bool operator==(const MultiIndex&) const = default;
};

/**
 * One basis random variable h of L^2(F_{t_k}): a product of probabilists'
 * Hermite polynomials in the normalized increments before t_k (and the
 * enlargement variable), scaled so that its L^2 norm is sqrt(2^N / T).
 */
struct ChaosBasisFunction {
    int grid_level = 0;
    double horizon = 1.0;
    int block = 0;
    bool enlargement = false;
    MultiIndex index;
    double normalization = 1.0;  // sqrt(2^N/T) / sqrt(prod m_j!)
};

ChaosBasisFunction make_chaos_function(int grid_level, double horizon, int block,
                                       bool enlargement, MultiIndex index);

// Probabilists' Hermite polynomial He_n(x) by the three-term recurrence.
double hermite_eval(int n, double x);

// c * prod_j He_{m_j}(coordinate_j). Throws if coords lacks a referenced slot.
double eval_h(const ChaosBasisFunction& h, const PathCoords& coords);

// All block-k basis functions of total degree <= d, in enumeration order:
// total degree ascending, then lexicographically descending exponent
// vectors. Exactly C(k + q + d, d) functions, q = 1 when enlargement.
std::vector<ChaosBasisFunction> enumerate_block_basis(int grid_level, double horizon,
                                                      int block, int max_degree,
                                                      bool enlargement);

// h carried on one grid block: chi_[t_k, t_{k+1}) (t) * h(omega), with the
// last block closed at T. Unit L^2(Omega x [0,T]) norm.
struct SimpleProcessBasisElement {
    ChaosBasisFunction h;
    double t_begin = 0.0;
    double t_end = 0.0;
    bool closes_at_horizon = false;
};

double eval_e(const SimpleProcessBasisElement& e, double t, const PathCoords& coords);

/**
 * The finite-dimensional trial space: all simple-process basis elements of
 * a grid, truncated at chaos degree d, in canonical flat order (blocks
 * ascending, then the block enumeration order). Immutable.
 */
class FiniteElementSpace {
public:
    FiniteElementSpace(const DyadicGrid& grid, int degree, bool enlargement);

    const DyadicGrid& grid() const { return grid_; }
    int degree() const { return degree_; }
    bool enlargement() const { return enlargement_; }

    std::size_t size() const { return elements_.size(); }
    const SimpleProcessBasisElement& element(std::size_t flat) const;
    std::span<const SimpleProcessBasisElement> block_elements(std::size_t k) const;

    std::size_t block_begin(std::size_t k) const;
    std::size_t block_size(std::size_t k) const;

    // Flat index -> (block k, 1-based index i within the block).
    std::pair<std::size_t, std::size_t> locate(std::size_t flat) const;

private:
    DyadicGrid grid_;
    int degree_;
    bool enlargement_;
    std::vector<SimpleProcessBasisElement> elements_;
    std::vector<std::size_t> block_offsets_;  // block_count + 1 entries
};

// E int_0^T <e_a, e_b> dtau over all element pairs, flat row-major. Intended
// for small spaces; the identity check below streams instead.
std::vector<double> gram_matrix(const FiniteElementSpace& space,
                                const ExpectationEngine& engine);

struct GramDefect {
    double max_abs_defect = 0.0;  // max |G_ab - delta_ab| over all entries
    double max_sigmas = 0.0;      // max |G_ab| / stderr over off-diagonal
                                  // entries (MC engine; diagonals carry the
                                  // deterministic normalization roundoff)
};

GramDefect gram_identity_defect(const FiniteElementSpace& space,
                                const ExpectationEngine& engine, int threads = 1);

// Debug text format: one line `k=<k> i=<i> degrees=[...] c=<norm>` per element.
void dump_basis(const FiniteElementSpace& space, std::ostream& os);

}  // namespace fintra
