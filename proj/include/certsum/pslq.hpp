#pragma once

#include "certsum/ball.hpp"
#include "certsum/expr.hpp"

#include <cmath>
#include <optional>
#include <vector>

namespace certsum {

struct RelationResult {
    std::optional<std::vector<Int>> coefficients; // not all zero when present
    double residual_log10 = 0;                    // certified |sum c_i x_i| bound
    mpfr_prec_t precision_used = 0;
};

namespace detail_pslq {

// Thin RAII matrix of mpfr values at fixed precision.
class Mat {
  public:
    Mat(int r, int c, mpfr_prec_t prec) : r_(r), c_(c), v_(static_cast<size_t>(r) * c) {
        for (auto& x : v_) {
            mpfr_init2(&x, prec);
            mpfr_set_zero(&x, 1);
        }
    }
    ~Mat() {
        for (auto& x : v_) mpfr_clear(&x);
    }
    Mat(const Mat&) = delete;
    mpfr_ptr at(int i, int j) { return &v_[static_cast<size_t>(i) * c_ + j]; }

  private:
    int r_, c_;
    std::vector<__mpfr_struct> v_;
};

} // namespace detail_pslq

// Integer-relation detection for a vector of certified values. Returns a
// relation whose residual, evaluated in ball arithmetic over the inputs,
// is certifiably below 10^-tolerance_digits; None when the norm bound shows
// no relation of the allowed height exists at this precision.
inline RelationResult pslq(const std::vector<RealBall>& values, const Int& max_height,
                           int tolerance_digits) {
    const int n = static_cast<int>(values.size());
    if (n < 2) throw std::invalid_argument("pslq needs at least two values");
    for (auto& v : values) {
        if (v.rad_log10() > -(tolerance_digits + 10))
            throw std::invalid_argument("pslq: input precision below tolerance + 10 digits");
    }
    mpfr_prec_t prec = prec_for_digits(tolerance_digits) + 16 * n + 64;
    RelationResult out;
    out.precision_used = prec;

    using detail_pslq::Mat;
    auto R = MPFR_RNDN;

    // working copies of the values, normalized
    Mat x(1, n, prec), y(1, n, prec);
    mpfr_t t, u, norm;
    mpfr_init2(t, prec);
    mpfr_init2(u, prec);
    mpfr_init2(norm, prec);
    mpfr_set_zero(norm, 1);
    for (int i = 0; i < n; ++i) {
        mpfr_set(x.at(0, i), values[static_cast<size_t>(i)].mid(), R);
        mpfr_sqr(t, x.at(0, i), R);
        mpfr_add(norm, norm, t, R);
    }
    mpfr_sqrt(norm, norm, R);
    if (mpfr_zero_p(norm)) {
        mpfr_clears(t, u, norm, nullptr);
        return out;
    }
    for (int i = 0; i < n; ++i) mpfr_div(y.at(0, i), x.at(0, i), norm, R);

    // s_j = sqrt(sum_{i>=j} y_i^2)
    Mat s(1, n, prec);
    for (int j = n - 1; j >= 0; --j) {
        mpfr_sqr(t, y.at(0, j), R);
        if (j + 1 < n) mpfr_add(t, t, u, R);
        mpfr_set(u, t, R); // running sum of squares
        mpfr_sqrt(s.at(0, j), t, R);
    }

    // H matrix (n x n-1)
    Mat H(n, n - 1, prec);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n - 1; ++j) {
            if (i < j) continue;
            if (i == j) {
                mpfr_div(H.at(i, j), s.at(0, i + 1), s.at(0, i), R);
            } else {
                // -y_i y_j / (s_j s_{j+1})
                mpfr_mul(t, y.at(0, i), y.at(0, j), R);
                mpfr_mul(u, s.at(0, j), s.at(0, j + 1), R);
                mpfr_div(H.at(i, j), t, u, R);
                mpfr_neg(H.at(i, j), H.at(i, j), R);
            }
        }
    }

    // integer matrices A (n x n) and B = A^{-1} (n x n), kept exactly
    std::vector<std::vector<Int>> A(n, std::vector<Int>(n, 0)), B(n, std::vector<Int>(n, 0));
    for (int i = 0; i < n; ++i) A[i][i] = B[i][i] = 1;

    auto reduce = [&]() {
        for (int i = 1; i < n; ++i) {
            for (int j = i - 1; j >= 0; --j) {
                mpfr_div(t, H.at(i, j), H.at(j, j), R);
                mpfr_round(t, t);
                if (mpfr_zero_p(t)) continue;
                Int q;
                mpfr_get_z(q.get_mpz_t(), t, R);
                // y_j += q y_i ; H_i* -= q H_j* ; A_i* -= q A_j* ; B_*j += q B_*i
                mpfr_mul_z(u, y.at(0, i), q.get_mpz_t(), R);
                mpfr_add(y.at(0, j), y.at(0, j), u, R);
                for (int c = 0; c <= j; ++c) {
                    mpfr_mul_z(u, H.at(j, c), q.get_mpz_t(), R);
                    mpfr_sub(H.at(i, c), H.at(i, c), u, R);
                }
                for (int c = 0; c < n; ++c) {
                    A[i][c] -= q * A[j][c];
                    B[c][j] += q * B[c][i];
                }
            }
        }
    };
    reduce();

    mpfr_t gamma, best, tiny;
    mpfr_init2(gamma, prec);
    mpfr_init2(best, prec);
    mpfr_init2(tiny, prec);
    mpfr_set_d(gamma, 2.0 / std::sqrt(3.0), R);
    mpfr_set_ui(tiny, 10, R);
    mpfr_pow_si(tiny, tiny, -(tolerance_digits + 6), R);

    long max_iter = 512L * n * n * (tolerance_digits + 8);
    for (long iter = 0; iter < max_iter; ++iter) {
        // pick r maximizing gamma^j |H_jj|
        int r = 0;
        mpfr_set_zero(best, 1);
        mpfr_set_ui(u, 1, R);
        for (int j = 0; j < n - 1; ++j) {
            mpfr_mul(u, u, gamma, R);
            mpfr_abs(t, H.at(j, j), R);
            mpfr_mul(t, t, u, R);
            if (mpfr_cmp(t, best) > 0) {
                mpfr_set(best, t, R);
                r = j;
            }
        }
        // swap rows r, r+1
        mpfr_swap(y.at(0, r), y.at(0, r + 1));
        for (int c = 0; c < n - 1; ++c) mpfr_swap(H.at(r, c), H.at(r + 1, c));
        std::swap(A[r], A[r + 1]);
        for (int i = 0; i < n; ++i) std::swap(B[i][r], B[i][r + 1]);

        if (r < n - 2) {
            // Givens rotation on columns r, r+1 of H
            mpfr_t a, b, h;
            mpfr_init2(a, prec);
            mpfr_init2(b, prec);
            mpfr_init2(h, prec);
            mpfr_set(a, H.at(r, r), R);
            mpfr_set(b, H.at(r, r + 1), R);
            mpfr_hypot(h, a, b, R);
            for (int i = r; i < n; ++i) {
                mpfr_mul(t, H.at(i, r), a, R);
                mpfr_mul(u, H.at(i, r + 1), b, R);
                mpfr_add(t, t, u, R);
                mpfr_div(t, t, h, R);
                mpfr_mul(u, H.at(i, r + 1), a, R);
                mpfr_t w;
                mpfr_init2(w, prec);
                mpfr_mul(w, H.at(i, r), b, R);
                mpfr_sub(u, u, w, R);
                mpfr_div(u, u, h, R);
                mpfr_set(H.at(i, r), t, R);
                mpfr_set(H.at(i, r + 1), u, R);
                mpfr_clear(w);
            }
            mpfr_clears(a, b, h, nullptr);
        }
        reduce();

        // termination: tiny y entry => relation in the matching column of B
        int found = -1;
        for (int j = 0; j < n; ++j) {
            mpfr_abs(t, y.at(0, j), R);
            if (mpfr_cmp(t, tiny) < 0) {
                found = j;
                break;
            }
        }
        if (found >= 0) {
            std::vector<Int> rel(static_cast<size_t>(n));
            Int height(0);
            bool nonzero = false;
            for (int i = 0; i < n; ++i) {
                rel[static_cast<size_t>(i)] = B[i][found];
                Int a = rel[static_cast<size_t>(i)];
                if (a < 0) a = -a;
                if (a > height) height = a;
                if (rel[static_cast<size_t>(i)] != 0) nonzero = true;
            }
            if (!nonzero) continue;
            if (height > max_height) break;
            // certify with ball arithmetic over the original inputs
            RealBall resid(values[0].prec());
            for (int i = 0; i < n; ++i)
                resid = resid + values[static_cast<size_t>(i)] *
                                    RealBall::from_int(rel[static_cast<size_t>(i)], prec);
            double bound = difference_bound_log10(resid, RealBall(64));
            if (bound < -tolerance_digits) {
                out.coefficients = rel;
                out.residual_log10 = bound;
                break;
            }
        }
        // norm bound: min over j of 1/|H_jj| exceeds height => no relation
        mpfr_set_inf(best, 1);
        for (int j = 0; j < n - 1; ++j) {
            mpfr_abs(t, H.at(j, j), R);
            if (mpfr_cmp(t, best) < 0) mpfr_set(best, t, R);
        }
        if (!mpfr_zero_p(best)) {
            mpfr_ui_div(t, 1, best, R);
            Int bound_int;
            mpfr_get_z(bound_int.get_mpz_t(), t, MPFR_RNDD);
            if (bound_int > max_height * 1000000) break; // no relation within height
        }
    }

    mpfr_clears(t, u, norm, gamma, best, tiny, nullptr);
    return out;
}

// ---- closed-form discovery ----

struct DiscoveryCandidate {
    std::optional<std::string> closed_form; // rendered candidate, never asserted
    std::vector<Int> relation;
    double margin_digits = 0;
    double residual_log10 = 0;
};

// Propose value = -(sum_i c_i basis_i)/c_0 from a PSLQ relation over
// [value, basis...]. The margin discounts the digits "spent" on the
// coefficient heights.
inline DiscoveryCandidate discover_closed_form(const RealBall& value,
                                               const std::vector<std::pair<std::string, RealBall>>& basis,
                                               int digits, const Int& max_height = Int(100000000)) {
    if (basis.empty()) throw std::invalid_argument("discover: empty basis");
    std::vector<RealBall> vec;
    vec.push_back(value);
    for (auto& [_, b] : basis) vec.push_back(b);
    RelationResult rel = pslq(vec, max_height, digits);
    DiscoveryCandidate cand;
    if (!rel.coefficients) return cand;
    const auto& c = *rel.coefficients;
    if (c[0] == 0) return cand;
    cand.relation = c;
    cand.residual_log10 = rel.residual_log10;
    double spent = 0;
    for (auto& ci : c) {
        Int a = ci < 0 ? Int(-ci) : ci;
        if (a > 1) spent += std::log10(a.get_d());
    }
    cand.margin_digits = -rel.residual_log10 - spent;
    std::string s;
    for (size_t i = 1; i < c.size(); ++i) {
        if (c[i] == 0) continue;
        Rational coef = make_rational(-c[i], c[0]);
        std::string piece;
        if (coef == 1) piece = basis[i - 1].first;
        else if (coef == -1) piece = "-" + basis[i - 1].first;
        else piece = "(" + coef.get_str() + ")*" + basis[i - 1].first;
        if (!s.empty() && piece[0] != '-') s += "+";
        s += piece;
    }
    if (s.empty()) s = "0";
    cand.closed_form = s;
    return cand;
}

} // namespace certsum
