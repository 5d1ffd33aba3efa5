#pragma once

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

namespace fintra {

/**
 * Sparse polynomial in finitely many independent standard Gaussian
 * coordinates, monomial basis. Coordinates are integer ids: nonnegative ids
 * are the normalized Brownian increments of some grid level, and two
 * negative ids are reserved (the time-0 enlargement variable and the
 * within-block bridge used by symbolic oracle rules).
 *
 * The bridge coordinate stands for the normalized partial increment
 * w(tau) - w(t_k) inside block k. It is a valid independent coordinate only
 * while no factor of the same expectation references increment k itself;
 * every use in this codebase multiplies it against F_{t_k}-measurable data.
 */
class GaussianPolynomial {
public:
    using Coord = std::int32_t;
    static constexpr Coord kEnlargement = -1;
    static constexpr Coord kBridge = -2;

    struct Term {
        std::vector<std::pair<Coord, int>> powers;  // sorted by coord, all powers >= 1
        double coef = 0.0;
    };

    GaussianPolynomial() = default;

    static GaussianPolynomial constant(double c);
    static GaussianPolynomial coordinate(Coord id);

    bool is_zero() const { return terms_.empty(); }
    const std::vector<Term>& terms() const { return terms_; }
    int total_degree() const;

    GaussianPolynomial& operator+=(const GaussianPolynomial& other);
    GaussianPolynomial& operator-=(const GaussianPolynomial& other);
    GaussianPolynomial& operator*=(double s);

    friend GaussianPolynomial operator+(GaussianPolynomial a, const GaussianPolynomial& b) {
        a += b;
        return a;
    }
    friend GaussianPolynomial operator-(GaussianPolynomial a, const GaussianPolynomial& b) {
        a -= b;
        return a;
    }
    friend GaussianPolynomial operator*(GaussianPolynomial a, double s) {
        a *= s;
        return a;
    }
    friend GaussianPolynomial operator*(double s, GaussianPolynomial a) {
        a *= s;
        return a;
    }

    double eval(const std::function<double(Coord)>& coordinate_value) const;

    // Adds coef * monomial, keeping the term list normalized.
    void add_term(std::vector<std::pair<Coord, int>> powers, double coef);

private:
    std::vector<Term> terms_;  // sorted by monomial, no zero coefficients
};

GaussianPolynomial poly_mul(const GaussianPolynomial& a, const GaussianPolynomial& b);

// E[x^p] for one standard Gaussian coordinate: 0 for odd p, (p-1)!! for even.
double gaussian_moment(int p);

// Exact expectation via coordinatewise moments and independence.
double exact_expect(const GaussianPolynomial& p);

// E[a * b] without materializing the product.
double expect_product(const GaussianPolynomial& a, const GaussianPolynomial& b);

}  // namespace fintra
