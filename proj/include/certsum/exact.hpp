#pragma once

#include "certsum/rational.hpp"

#include <mutex>
#include <stdexcept>
#include <vector>

namespace certsum {

// H_n^{(m)} = sum_{0<k<=n} k^{-m}, exact. Cached per order behind a mutex;
// all callers see immutable values.
class HarmonicTable {
  public:
    Rational value(unsigned long n, unsigned m) {
        if (m == 0) throw std::invalid_argument("harmonic: order must be >= 1");
        std::lock_guard<std::mutex> lock(mu_);
        if (m >= cache_.size()) cache_.resize(m + 1);
        auto& col = cache_[m];
        if (col.empty()) col.push_back(Rational(0));
        while (col.size() <= n) {
            unsigned long k = col.size();
            Rational term(1, 1);
            Int kk(static_cast<long>(k));
            Int den = pow_int(kk, m);
            term = Rational(1, den);
            term.canonicalize();
            col.push_back(col.back() + term);
        }
        return col[n];
    }

  private:
    std::mutex mu_;
    std::vector<std::vector<Rational>> cache_;
};

inline HarmonicTable& harmonic_table() {
    static HarmonicTable t;
    return t;
}

inline Rational harmonic(long n, unsigned m = 1) {
    if (n < 0) throw std::invalid_argument("harmonic: negative index");
    return harmonic_table().value(static_cast<unsigned long>(n), m);
}

// Binomial coefficient, zero outside 0 <= k <= n.
inline Int binomial(const Int& n, const Int& k) {
    if (k < 0 || k > n || n < 0) return Int(0);
    Int r;
    mpz_bin_ui(r.get_mpz_t(), n.get_mpz_t(), k.get_ui());
    return r;
}

inline Int binomial(long n, long k) { return binomial(Int(n), Int(k)); }

// Kronecker symbol (a|n), standard conventions: (a|0)=1 iff a=+-1,
// (a|-1)=-1 iff a<0, (a|2) by a mod 8.
inline int kronecker_symbol(const Int& a, const Int& n) {
    return mpz_kronecker(a.get_mpz_t(), n.get_mpz_t());
}

inline int kronecker_symbol(long a, long n) { return kronecker_symbol(Int(a), Int(n)); }

// Exact Bernoulli numbers B_0.. (B_1 = -1/2), by the defining recurrence
//   sum_{k=0}^{n} C(n+1,k) B_k = 0.
// Used by the constants kernel (zeta at even integers, Euler-Maclaurin tails).
class BernoulliTable {
  public:
    Rational value(unsigned n) {
        std::lock_guard<std::mutex> lock(mu_);
        while (vals_.size() <= n) grow();
        return vals_[n];
    }

  private:
    void grow() {
        unsigned n = static_cast<unsigned>(vals_.size());
        if (n == 0) {
            vals_.push_back(Rational(1));
            return;
        }
        if (n > 1 && (n & 1)) {
            vals_.push_back(Rational(0));
            return;
        }
        Rational acc(0);
        Int c(1); // C(n+1, k), updated multiplicatively
        for (unsigned k = 0; k < n; ++k) {
            acc += Rational(c) * vals_[k];
            c = c * (n + 1 - k) / (k + 1);
        }
        // c is now C(n+1, n) = n+1
        vals_.push_back(-acc / Rational(c));
    }

    std::mutex mu_;
    std::vector<Rational> vals_;
};

inline BernoulliTable& bernoulli_table() {
    static BernoulliTable t;
    return t;
}

inline Rational bernoulli_exact(unsigned n) { return bernoulli_table().value(n); }

} // namespace certsum
