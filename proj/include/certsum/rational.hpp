#pragma once

#include <gmpxx.h>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace certsum {

using Int = mpz_class;
using Rational = mpq_class;

inline Rational make_rational(long num, long den = 1) {
    Rational r(num, den);
    r.canonicalize();
    return r;
}

inline Rational make_rational(const Int& num, const Int& den) {
    Rational r(num, den);
    r.canonicalize();
    return r;
}

// p-adic valuation of a nonzero integer; strips the p-part into `unit`.
inline long remove_p(const Int& n, const Int& p, Int& unit) {
    if (n == 0) throw std::invalid_argument("remove_p: zero");
    return static_cast<long>(mpz_remove(unit.get_mpz_t(), n.get_mpz_t(), p.get_mpz_t()));
}

inline long padic_valuation(const Rational& r, const Int& p) {
    if (r == 0) throw std::invalid_argument("padic_valuation: zero");
    Int tmp;
    long vn = remove_p(r.get_num(), p, tmp);
    long vd = remove_p(r.get_den(), p, tmp);
    return vn - vd;
}

inline Int pow_int(const Int& base, unsigned long e) {
    Int r;
    mpz_pow_ui(r.get_mpz_t(), base.get_mpz_t(), e);
    return r;
}

inline Rational pow_rational(const Rational& base, long e) {
    if (e == 0) return Rational(1);
    Rational r;
    unsigned long a = static_cast<unsigned long>(e < 0 ? -e : e);
    mpz_pow_ui(r.get_num_mpz_t(), base.get_num_mpz_t(), a);
    mpz_pow_ui(r.get_den_mpz_t(), base.get_den_mpz_t(), a);
    if (e < 0) {
        if (base == 0) throw std::domain_error("pow_rational: 0^negative");
        r = Rational(r.get_den(), r.get_num());
    }
    r.canonicalize();
    return r;
}

inline std::string to_string(const Rational& r) { return r.get_str(); }

inline std::optional<long> to_long(const Int& n) {
    if (!n.fits_slong_p()) return std::nullopt;
    return n.get_si();
}

// Integer part of an exact rational, or nullopt if not an integer.
inline std::optional<Int> as_integer(const Rational& r) {
    if (r.get_den() != 1) return std::nullopt;
    return r.get_num();
}

// Element of Q(sqrt(d)): a + b*sqrt(d), d squarefree >= 0 (d == 0 means plain rational).
// Values from different fields must not be mixed except when one side is rational.
struct QuadValue {
    Rational a;
    Rational b;
    long d = 0;

    QuadValue() : a(0), b(0), d(0) {}
    QuadValue(const Rational& q) : a(q), b(0), d(0) {}
    QuadValue(const Rational& a_, const Rational& b_, long d_) : a(a_), b(b_), d(d_) {
        if (b == 0) d = 0;
    }

    bool is_rational() const { return b == 0; }
    bool is_zero() const { return a == 0 && b == 0; }

    static long merge_d(const QuadValue& x, const QuadValue& y) {
        if (x.d == 0) return y.d;
        if (y.d == 0 || x.d == y.d) return x.d;
        throw std::domain_error("QuadValue: mixed surds");
    }

    QuadValue operator+(const QuadValue& o) const {
        long dd = merge_d(*this, o);
        return QuadValue(a + o.a, b + o.b, dd);
    }
    QuadValue operator-(const QuadValue& o) const {
        long dd = merge_d(*this, o);
        return QuadValue(a - o.a, b - o.b, dd);
    }
    QuadValue operator-() const { return QuadValue(-a, -b, d); }
    QuadValue operator*(const QuadValue& o) const {
        long dd = merge_d(*this, o);
        return QuadValue(a * o.a + b * o.b * dd, a * o.b + b * o.a, dd);
    }
    QuadValue inverse() const {
        // 1/(a+b*sqrt(d)) = (a-b*sqrt(d))/(a^2-b^2 d)
        Rational n = a * a - b * b * Rational(d);
        if (n == 0) throw std::domain_error("QuadValue: division by zero");
        return QuadValue(a / n, -b / n, d);
    }
    QuadValue operator/(const QuadValue& o) const { return *this * o.inverse(); }

    QuadValue pow(long e) const {
        if (e < 0) return inverse().pow(-e);
        QuadValue r(Rational(1));
        QuadValue base = *this;
        unsigned long n = static_cast<unsigned long>(e);
        while (n) {
            if (n & 1) r = r * base;
            base = base * base;
            n >>= 1;
        }
        return r;
    }

    bool operator==(const QuadValue& o) const { return a == o.a && b == o.b && d == o.d; }

    std::string str() const {
        if (b == 0) return a.get_str();
        std::string s;
        if (a != 0) s = a.get_str() + (b > 0 ? "+" : "");
        s += b.get_str() + "*sqrt(" + std::to_string(d) + ")";
        return s;
    }
};

} // namespace certsum
