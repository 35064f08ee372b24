#pragma once

#include "certsum/rational.hpp"

#include <mpfr.h>

#include <algorithm>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <utility>

namespace certsum {

// Midpoint-radius interval ("ball"): the represented real always lies in
// [mid - rad, mid + rad]. The midpoint carries the working precision, the
// radius is a low-precision upper bound maintained with upward rounding.
// Every operation rounds outward, so containment is preserved.
class RealBall {
  public:
    static constexpr mpfr_prec_t kRadPrec = 32;

    explicit RealBall(mpfr_prec_t prec = 64) : prec_(prec) {
        mpfr_init2(mid_, prec_);
        mpfr_init2(rad_, kRadPrec);
        mpfr_set_zero(mid_, 1);
        mpfr_set_zero(rad_, 1);
    }

    RealBall(const RealBall& o) : prec_(o.prec_) {
        mpfr_init2(mid_, prec_);
        mpfr_init2(rad_, kRadPrec);
        mpfr_set(mid_, o.mid_, MPFR_RNDN);
        mpfr_set(rad_, o.rad_, MPFR_RNDU);
    }

    RealBall(RealBall&& o) noexcept : prec_(o.prec_) {
        mid_[0] = o.mid_[0];
        rad_[0] = o.rad_[0];
        o.moved_ = true;
    }

    RealBall& operator=(const RealBall& o) {
        if (this != &o) {
            mpfr_set_prec(mid_, o.prec_);
            prec_ = o.prec_;
            mpfr_set(mid_, o.mid_, MPFR_RNDN);
            mpfr_set(rad_, o.rad_, MPFR_RNDU);
        }
        return *this;
    }

    RealBall& operator=(RealBall&& o) noexcept {
        if (this != &o) {
            if (!moved_) {
                mpfr_clear(mid_);
                mpfr_clear(rad_);
            }
            prec_ = o.prec_;
            mid_[0] = o.mid_[0];
            rad_[0] = o.rad_[0];
            moved_ = false;
            o.moved_ = true;
        }
        return *this;
    }

    ~RealBall() {
        if (!moved_) {
            mpfr_clear(mid_);
            mpfr_clear(rad_);
        }
    }

    static RealBall exact_long(long v, mpfr_prec_t prec) {
        RealBall b(prec);
        int t = mpfr_set_si(b.mid_, v, MPFR_RNDN);
        if (t != 0) b.bump_ulp();
        return b;
    }

    static RealBall from_int(const Int& v, mpfr_prec_t prec) {
        RealBall b(prec);
        int t = mpfr_set_z(b.mid_, v.get_mpz_t(), MPFR_RNDN);
        if (t != 0) b.bump_ulp();
        return b;
    }

    static RealBall from_rational(const Rational& q, mpfr_prec_t prec) {
        RealBall b(prec);
        int t = mpfr_set_q(b.mid_, q.get_mpq_t(), MPFR_RNDN);
        if (t != 0) b.bump_ulp();
        return b;
    }

    // Exact hex-float strings as produced by "%Ra" (cache deserialization).
    static bool from_hex_strings(const std::string& mid, const std::string& rad,
                                 mpfr_prec_t prec, RealBall& out) {
        RealBall b(prec);
        if (mpfr_set_str(b.mid_, mid.c_str(), 0, MPFR_RNDN) != 0) return false;
        if (mpfr_set_str(b.rad_, rad.c_str(), 0, MPFR_RNDU) != 0) return false;
        if (mpfr_sgn(b.rad_) < 0) return false;
        out = b;
        return true;
    }

    mpfr_prec_t prec() const { return prec_; }
    const mpfr_t& mid() const { return mid_; }
    const mpfr_t& rad() const { return rad_; }
    bool rad_is_zero() const { return mpfr_zero_p(rad_); }

    bool is_finite() const { return mpfr_number_p(mid_) && mpfr_number_p(rad_); }

    RealBall operator-() const {
        RealBall r = *this;
        mpfr_neg(r.mid_, r.mid_, MPFR_RNDN);
        return r;
    }

    RealBall abs() const {
        RealBall r = *this;
        mpfr_abs(r.mid_, r.mid_, MPFR_RNDN);
        return r;
    }

    RealBall operator+(const RealBall& o) const {
        RealBall r(std::max(prec_, o.prec_));
        int t = mpfr_add(r.mid_, mid_, o.mid_, MPFR_RNDN);
        mpfr_add(r.rad_, rad_, o.rad_, MPFR_RNDU);
        if (t != 0) r.bump_ulp();
        return r;
    }

    RealBall operator-(const RealBall& o) const {
        RealBall r(std::max(prec_, o.prec_));
        int t = mpfr_sub(r.mid_, mid_, o.mid_, MPFR_RNDN);
        mpfr_add(r.rad_, rad_, o.rad_, MPFR_RNDU);
        if (t != 0) r.bump_ulp();
        return r;
    }

    RealBall operator*(const RealBall& o) const {
        RealBall r(std::max(prec_, o.prec_));
        int t = mpfr_mul(r.mid_, mid_, o.mid_, MPFR_RNDN);
        // |a| rb + |b| ra + ra rb, all rounded up
        mpfr_t am, bm, tmp;
        mpfr_init2(am, kRadPrec);
        mpfr_init2(bm, kRadPrec);
        mpfr_init2(tmp, kRadPrec);
        mpfr_abs(am, mid_, MPFR_RNDU);
        mpfr_abs(bm, o.mid_, MPFR_RNDU);
        mpfr_mul(tmp, am, o.rad_, MPFR_RNDU);
        mpfr_set(r.rad_, tmp, MPFR_RNDU);
        mpfr_mul(tmp, bm, rad_, MPFR_RNDU);
        mpfr_add(r.rad_, r.rad_, tmp, MPFR_RNDU);
        mpfr_mul(tmp, rad_, o.rad_, MPFR_RNDU);
        mpfr_add(r.rad_, r.rad_, tmp, MPFR_RNDU);
        mpfr_clears(am, bm, tmp, nullptr);
        if (t != 0) r.bump_ulp();
        return r;
    }

    bool contains_zero() const {
        mpfr_t am;
        mpfr_init2(am, kRadPrec);
        mpfr_abs(am, mid_, MPFR_RNDD);
        bool z = mpfr_cmp(am, rad_) <= 0;
        mpfr_clear(am);
        return z;
    }

    RealBall reciprocal() const {
        if (contains_zero()) throw std::domain_error("RealBall: division by interval containing zero");
        RealBall r(prec_);
        int t = mpfr_ui_div(r.mid_, 1, mid_, MPFR_RNDN);
        // error <= rad / (|m| (|m| - rad))
        mpfr_t am, den, tmp;
        mpfr_init2(am, kRadPrec);
        mpfr_init2(den, kRadPrec);
        mpfr_init2(tmp, kRadPrec);
        mpfr_abs(am, mid_, MPFR_RNDD);
        mpfr_sub(den, am, rad_, MPFR_RNDD);
        mpfr_mul(den, den, am, MPFR_RNDD);
        mpfr_div(tmp, rad_, den, MPFR_RNDU);
        mpfr_set(r.rad_, tmp, MPFR_RNDU);
        mpfr_clears(am, den, tmp, nullptr);
        if (t != 0) r.bump_ulp();
        return r;
    }

    RealBall operator/(const RealBall& o) const { return *this * o.reciprocal(); }

    RealBall pow_si(long n) const {
        if (n == 0) return exact_long(1, prec_);
        if (n < 0) return reciprocal().pow_si(-n);
        RealBall acc = exact_long(1, prec_);
        RealBall base = *this;
        unsigned long u = static_cast<unsigned long>(n);
        while (u) {
            if (u & 1) acc = acc * base;
            if (u >>= 1) base = base * base;
        }
        return acc;
    }

    RealBall mul_rational(const Rational& q) const {
        return *this * from_rational(q, prec_);
    }

    // Lower/upper bounds as fresh balls of radius zero.
    RealBall lower(mpfr_prec_t prec = 0) const {
        RealBall r(prec ? prec : prec_ + kRadPrec);
        mpfr_sub(r.mid_, mid_, rad_, MPFR_RNDD);
        return r;
    }
    RealBall upper(mpfr_prec_t prec = 0) const {
        RealBall r(prec ? prec : prec_ + kRadPrec);
        mpfr_add(r.mid_, mid_, rad_, MPFR_RNDU);
        return r;
    }

    static RealBall from_endpoints(const mpfr_t lo, const mpfr_t hi, mpfr_prec_t prec) {
        RealBall r(prec);
        mpfr_add(r.mid_, lo, hi, MPFR_RNDN);
        mpfr_div_2ui(r.mid_, r.mid_, 1, MPFR_RNDN);
        mpfr_t d1, d2;
        mpfr_init2(d1, kRadPrec);
        mpfr_init2(d2, kRadPrec);
        mpfr_sub(d1, hi, r.mid_, MPFR_RNDU);
        mpfr_sub(d2, r.mid_, lo, MPFR_RNDU);
        if (mpfr_cmp(d1, d2) < 0) mpfr_set(d1, d2, MPFR_RNDU);
        if (mpfr_sgn(d1) < 0) mpfr_set_zero(d1, 1);
        mpfr_set(r.rad_, d1, MPFR_RNDU);
        mpfr_clears(d1, d2, nullptr);
        return r;
    }

    template <typename F>
    RealBall monotone_map(F&& f, bool clamp_lo_zero = false) const {
        mpfr_t lo, hi, flo, fhi;
        mpfr_init2(lo, prec_ + kRadPrec);
        mpfr_init2(hi, prec_ + kRadPrec);
        mpfr_init2(flo, prec_);
        mpfr_init2(fhi, prec_);
        mpfr_sub(lo, mid_, rad_, MPFR_RNDD);
        mpfr_add(hi, mid_, rad_, MPFR_RNDU);
        if (clamp_lo_zero && mpfr_sgn(lo) < 0) mpfr_set_zero(lo, 1);
        f(flo, lo, MPFR_RNDD);
        f(fhi, hi, MPFR_RNDU);
        RealBall r = from_endpoints(flo, fhi, prec_);
        mpfr_clears(lo, hi, flo, fhi, nullptr);
        return r;
    }

    RealBall sqrt() const {
        mpfr_t hi;
        mpfr_init2(hi, prec_);
        mpfr_add(hi, mid_, rad_, MPFR_RNDU);
        bool neg = mpfr_sgn(hi) < 0;
        mpfr_clear(hi);
        if (neg) throw std::domain_error("RealBall: sqrt of negative interval");
        return monotone_map([](mpfr_t out, const mpfr_t in, mpfr_rnd_t rnd) {
            mpfr_sqrt(out, in, rnd);
        }, true);
    }

    RealBall rootn(unsigned long n) const {
        mpfr_t hi;
        mpfr_init2(hi, prec_);
        mpfr_add(hi, mid_, rad_, MPFR_RNDU);
        bool neg = mpfr_sgn(hi) < 0;
        mpfr_clear(hi);
        if (neg && n % 2 == 0) throw std::domain_error("RealBall: even root of negative interval");
        return monotone_map([n](mpfr_t out, const mpfr_t in, mpfr_rnd_t rnd) {
            mpfr_rootn_ui(out, in, n, rnd);
        }, n % 2 == 0);
    }

    RealBall log() const {
        mpfr_t lo;
        mpfr_init2(lo, prec_);
        mpfr_sub(lo, mid_, rad_, MPFR_RNDD);
        bool bad = mpfr_sgn(lo) <= 0;
        mpfr_clear(lo);
        if (bad) throw std::domain_error("RealBall: log of interval reaching 0");
        return monotone_map([](mpfr_t out, const mpfr_t in, mpfr_rnd_t rnd) {
            mpfr_log(out, in, rnd);
        });
    }

    RealBall exp() const {
        return monotone_map([](mpfr_t out, const mpfr_t in, mpfr_rnd_t rnd) {
            mpfr_exp(out, in, rnd);
        });
    }

    // sin/cos via Lipschitz bound |f'| <= 1.
    RealBall sin() const {
        RealBall r = *this;
        int t = mpfr_sin(r.mid_, mid_, MPFR_RNDN);
        if (t != 0) r.bump_ulp();
        return r;
    }
    RealBall cos() const {
        RealBall r = *this;
        int t = mpfr_cos(r.mid_, mid_, MPFR_RNDN);
        if (t != 0) r.bump_ulp();
        return r;
    }

    static RealBall pi(mpfr_prec_t prec) {
        mpfr_t lo, hi;
        mpfr_init2(lo, prec);
        mpfr_init2(hi, prec);
        mpfr_const_pi(lo, MPFR_RNDD);
        mpfr_const_pi(hi, MPFR_RNDU);
        RealBall r = from_endpoints(lo, hi, prec);
        mpfr_clears(lo, hi, nullptr);
        return r;
    }

    static RealBall catalan(mpfr_prec_t prec) {
        mpfr_t lo, hi;
        mpfr_init2(lo, prec);
        mpfr_init2(hi, prec);
        mpfr_const_catalan(lo, MPFR_RNDD);
        mpfr_const_catalan(hi, MPFR_RNDU);
        RealBall r = from_endpoints(lo, hi, prec);
        mpfr_clears(lo, hi, nullptr);
        return r;
    }

    // |value| upper bound, returned as a zero-radius ball.
    RealBall abs_ub() const {
        RealBall r(kRadPrec * 2);
        mpfr_abs(r.mid_, mid_, MPFR_RNDU);
        mpfr_add(r.mid_, r.mid_, rad_, MPFR_RNDU);
        return r;
    }

    // max(0, |mid| - rad), lower bound of |value|.
    RealBall abs_lb() const {
        RealBall r(kRadPrec * 2);
        mpfr_abs(r.mid_, mid_, MPFR_RNDD);
        mpfr_sub(r.mid_, r.mid_, rad_, MPFR_RNDD);
        if (mpfr_sgn(r.mid_) < 0) mpfr_set_zero(r.mid_, 1);
        return r;
    }

    // Strict numeric comparison of zero-radius bounds.
    static int cmp_mid(const RealBall& a, const RealBall& b) { return mpfr_cmp(a.mid_, b.mid_); }

    void add_error(const RealBall& bound) {
        mpfr_t t;
        mpfr_init2(t, kRadPrec);
        mpfr_abs(t, bound.mid_, MPFR_RNDU);
        mpfr_add(t, t, bound.rad_, MPFR_RNDU);
        mpfr_add(rad_, rad_, t, MPFR_RNDU);
        mpfr_clear(t);
    }

    void add_error_2exp(long e2) {
        mpfr_t t;
        mpfr_init2(t, kRadPrec);
        mpfr_set_ui_2exp(t, 1, e2, MPFR_RNDU);
        mpfr_add(rad_, rad_, t, MPFR_RNDU);
        mpfr_clear(t);
    }

    bool contains(const Rational& q) const {
        mpfr_t d;
        mpfr_init2(d, prec_ + 2 * kRadPrec);
        mpfr_sub_q(d, mid_, q.get_mpq_t(), MPFR_RNDA); // away: upper bound of |mid-q| after abs
        mpfr_abs(d, d, MPFR_RNDU);
        bool ok = mpfr_cmp(d, rad_) <= 0;
        mpfr_clear(d);
        return ok;
    }

    bool contains_ball(const RealBall& o) const {
        // [o.mid - o.rad, o.mid + o.rad] inside [mid - rad, mid + rad], outward-safe
        mpfr_t d;
        mpfr_init2(d, prec_ + 2 * kRadPrec);
        mpfr_sub(d, mid_, o.mid_, MPFR_RNDA);
        mpfr_abs(d, d, MPFR_RNDU);
        mpfr_add(d, d, o.rad_, MPFR_RNDU);
        bool ok = mpfr_cmp(d, rad_) <= 0;
        mpfr_clear(d);
        return ok;
    }

    bool intersects(const RealBall& o) const {
        mpfr_t d, s;
        mpfr_init2(d, prec_ + 2 * kRadPrec);
        mpfr_init2(s, kRadPrec);
        mpfr_sub(d, mid_, o.mid_, MPFR_RNDZ); // toward zero: lower bound of |mid diff|
        mpfr_abs(d, d, MPFR_RNDD);
        mpfr_add(s, rad_, o.rad_, MPFR_RNDU);
        bool ok = mpfr_cmp(d, s) <= 0;
        mpfr_clears(d, s, nullptr);
        return ok;
    }

    std::string str(int digits = 20) const {
        char* buf = nullptr;
        mpfr_asprintf(&buf, "%.*Rg", digits, mid_);
        std::string s(buf);
        mpfr_free_str(buf);
        char* rb = nullptr;
        mpfr_asprintf(&rb, "%.3Rg", rad_);
        s += " +/- ";
        s += rb;
        mpfr_free_str(rb);
        return s;
    }

    // log10 of an upper bound of the radius (for diagnostics/margins).
    double rad_log10() const {
        if (mpfr_zero_p(rad_)) return -1e9;
        mpfr_t t;
        mpfr_init2(t, 64);
        mpfr_log10(t, rad_, MPFR_RNDU);
        double v = mpfr_get_d(t, MPFR_RNDU);
        mpfr_clear(t);
        return v;
    }

  private:
    void bump_ulp() {
        if (mpfr_zero_p(mid_)) {
            // inexact zero cannot occur in our exponent range; keep a guard anyway
            mpfr_t t;
            mpfr_init2(t, kRadPrec);
            mpfr_set_ui_2exp(t, 1, -(prec_ + 64), MPFR_RNDU);
            mpfr_add(rad_, rad_, t, MPFR_RNDU);
            mpfr_clear(t);
            return;
        }
        mpfr_t t;
        mpfr_init2(t, kRadPrec);
        mpfr_set_ui_2exp(t, 1, mpfr_get_exp(mid_) - prec_, MPFR_RNDU);
        mpfr_add(rad_, rad_, t, MPFR_RNDU);
        mpfr_clear(t);
    }

    mpfr_prec_t prec_;
    mpfr_t mid_;
    mpfr_t rad_;
    bool moved_ = false;
};

enum class Verdict { CertifiedEqual, CertifiedDistinct, Inconclusive };

inline const char* verdict_name(Verdict v) {
    switch (v) {
        case Verdict::CertifiedEqual: return "CertifiedEqual";
        case Verdict::CertifiedDistinct: return "CertifiedDistinct";
        default: return "Inconclusive";
    }
}

// |a.mid - b.mid| + a.rad + b.rad < 10^-t  => CertifiedEqual
// disjoint balls                           => CertifiedDistinct
inline Verdict ball_compare(const RealBall& a, const RealBall& b, int digits) {
    mpfr_prec_t wp = std::max(a.prec(), b.prec()) + 64;
    mpfr_t d, s, tol;
    mpfr_init2(d, wp);
    mpfr_init2(s, RealBall::kRadPrec);
    mpfr_init2(tol, 64);
    mpfr_sub(d, a.mid(), b.mid(), MPFR_RNDA);
    mpfr_abs(d, d, MPFR_RNDU);
    mpfr_add(s, a.rad(), b.rad(), MPFR_RNDU);
    mpfr_set_ui(tol, 10, MPFR_RNDN);
    mpfr_pow_si(tol, tol, -digits, MPFR_RNDD);
    mpfr_t total;
    mpfr_init2(total, wp);
    mpfr_add(total, d, s, MPFR_RNDU);
    Verdict v;
    if (mpfr_cmp(total, tol) < 0) {
        v = Verdict::CertifiedEqual;
    } else {
        mpfr_t dlo;
        mpfr_init2(dlo, wp);
        mpfr_sub(dlo, a.mid(), b.mid(), MPFR_RNDZ);
        mpfr_abs(dlo, dlo, MPFR_RNDD);
        v = (mpfr_cmp(dlo, s) > 0) ? Verdict::CertifiedDistinct : Verdict::Inconclusive;
        mpfr_clear(dlo);
    }
    mpfr_clears(d, s, tol, total, nullptr);
    return v;
}

// Certified |a - b| upper bound as log10, for reports.
inline double difference_bound_log10(const RealBall& a, const RealBall& b) {
    RealBall d = (a - b).abs_ub();
    mpfr_t t;
    mpfr_init2(t, 64);
    if (mpfr_zero_p(d.mid())) {
        mpfr_clear(t);
        return -1e9;
    }
    mpfr_log10(t, d.mid(), MPFR_RNDU);
    double v = mpfr_get_d(t, MPFR_RNDU);
    mpfr_clear(t);
    return v;
}

inline mpfr_prec_t prec_for_digits(int decimal_digits) {
    return static_cast<mpfr_prec_t>(decimal_digits * 10 / 3 + decimal_digits / 30 + 64);
}

inline RealBall quad_to_ball(const QuadValue& q, mpfr_prec_t prec) {
    RealBall a = RealBall::from_rational(q.a, prec);
    if (q.b == 0) return a;
    RealBall s = RealBall::exact_long(q.d, prec).sqrt();
    return a + RealBall::from_rational(q.b, prec) * s;
}

} // namespace certsum
