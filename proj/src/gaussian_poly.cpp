#include "fintra/gaussian_poly.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fintra {

namespace {

bool powers_less(const std::vector<std::pair<GaussianPolynomial::Coord, int>>& a,
                 const std::vector<std::pair<GaussianPolynomial::Coord, int>>& b) {
    return a < b;
}

}  // namespace

GaussianPolynomial GaussianPolynomial::constant(double c) {
    GaussianPolynomial p;
    p.add_term({}, c);
    return p;
}

GaussianPolynomial GaussianPolynomial::coordinate(Coord id) {
    GaussianPolynomial p;
    p.add_term({{id, 1}}, 1.0);
    return p;
}

int GaussianPolynomial::total_degree() const {
    int deg = 0;
    for (const Term& t : terms_) {
        int d = 0;
        for (const auto& [c, p] : t.powers) d += p;
        deg = std::max(deg, d);
    }
    return deg;
}

void GaussianPolynomial::add_term(std::vector<std::pair<Coord, int>> powers,
                                  double coef) {
    if (coef == 0.0) return;
    auto it = std::lower_bound(
        terms_.begin(), terms_.end(), powers,
        [](const Term& t, const std::vector<std::pair<Coord, int>>& key) {
            return powers_less(t.powers, key);
        });
    if (it != terms_.end() && it->powers == powers) {
        it->coef += coef;
        if (it->coef == 0.0) terms_.erase(it);
    } else {
        terms_.insert(it, Term{std::move(powers), coef});
    }
}

GaussianPolynomial& GaussianPolynomial::operator+=(const GaussianPolynomial& other) {
    if (this == &other) {
        *this *= 2.0;
        return *this;
    }
    for (const Term& t : other.terms_) add_term(t.powers, t.coef);
    return *this;
}

GaussianPolynomial& GaussianPolynomial::operator-=(const GaussianPolynomial& other) {
    if (this == &other) {
        terms_.clear();
        return *this;
    }
    for (const Term& t : other.terms_) add_term(t.powers, -t.coef);
    return *this;
}

GaussianPolynomial& GaussianPolynomial::operator*=(double s) {
    if (s == 0.0) {
        terms_.clear();
        return *this;
    }
    for (Term& t : terms_) t.coef *= s;
    return *this;
}

double GaussianPolynomial::eval(
    const std::function<double(Coord)>& coordinate_value) const {
    double sum = 0.0;
    for (const Term& t : terms_) {
        double v = t.coef;
        for (const auto& [c, p] : t.powers) {
            const double x = coordinate_value(c);
            for (int i = 0; i < p; ++i) v *= x;
        }
        sum += v;
    }
    return sum;
}

GaussianPolynomial poly_mul(const GaussianPolynomial& a, const GaussianPolynomial& b) {
    GaussianPolynomial out;
    std::vector<std::pair<GaussianPolynomial::Coord, int>> merged;
    for (const auto& ta : a.terms()) {
        for (const auto& tb : b.terms()) {
            merged.clear();
            merged.reserve(ta.powers.size() + tb.powers.size());
            auto ia = ta.powers.begin();
            auto ib = tb.powers.begin();
            while (ia != ta.powers.end() && ib != tb.powers.end()) {
                if (ia->first < ib->first) {
                    merged.push_back(*ia++);
                } else if (ib->first < ia->first) {
                    merged.push_back(*ib++);
                } else {
                    merged.emplace_back(ia->first, ia->second + ib->second);
                    ++ia;
                    ++ib;
                }
            }
            merged.insert(merged.end(), ia, ta.powers.end());
            merged.insert(merged.end(), ib, tb.powers.end());
            out.add_term(merged, ta.coef * tb.coef);
        }
    }
    return out;
}

double gaussian_moment(int p) {
    if (p < 0) throw std::invalid_argument("gaussian_moment: negative power");
    if (p % 2 == 1) return 0.0;
    double m = 1.0;
    for (int i = p - 1; i > 1; i -= 2) m *= static_cast<double>(i);
    return m;
}

double exact_expect(const GaussianPolynomial& p) {
    double sum = 0.0;
    for (const auto& t : p.terms()) {
        double v = t.coef;
        for (const auto& [c, pw] : t.powers) {
            if (pw % 2 == 1) {
                v = 0.0;
                break;
            }
            v *= gaussian_moment(pw);
        }
        sum += v;
    }
    return sum;
}

double expect_product(const GaussianPolynomial& a, const GaussianPolynomial& b) {
    double sum = 0.0;
    for (const auto& ta : a.terms()) {
        for (const auto& tb : b.terms()) {
            double v = ta.coef * tb.coef;
            auto ia = ta.powers.begin();
            auto ib = tb.powers.begin();
            bool odd = false;
            while (!odd && (ia != ta.powers.end() || ib != tb.powers.end())) {
                int pw;
                if (ib == tb.powers.end() ||
                    (ia != ta.powers.end() && ia->first < ib->first)) {
                    pw = (ia++)->second;
                } else if (ia == ta.powers.end() || ib->first < ia->first) {
                    pw = (ib++)->second;
                } else {
                    pw = ia->second + ib->second;
                    ++ia;
                    ++ib;
                }
                if (pw % 2 == 1) {
                    odd = true;
                } else {
                    v *= gaussian_moment(pw);
                }
            }
            if (!odd) sum += v;
        }
    }
    return sum;
}

}  // namespace fintra
