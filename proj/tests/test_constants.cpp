#include <catch2/catch_amalgamated.hpp>

#include "certsum/constants.hpp"

#include <cstdlib>
#include <filesystem>

using namespace certsum;

namespace {

// Exact rational from a decimal literal.
Rational dec(const std::string& s) {
    auto dot = s.find('.');
    if (dot == std::string::npos) return Rational(Int(s.c_str(), 10));
    std::string digits = s.substr(0, dot) + s.substr(dot + 1);
    Rational r(Int(digits.c_str(), 10), pow_int(Int(10), s.size() - dot - 1));
    r.canonicalize();
    return r;
}

RealBall dec_ball(const std::string& s, mpfr_prec_t prec) {
    return RealBall::from_rational(dec(s), prec);
}

void check_digits(const RealBall& b, const std::string& s, int digits) {
    INFO("want " << s << " got " << b.str(digits + 5));
    CHECK(ball_compare(b, dec_ball(s, b.prec()), digits) == Verdict::CertifiedEqual);
}

// AGM enclosure: for 0 < b <= a the limit lies in [b_n, a_n] at every step.
RealBall agm_ball(RealBall a, RealBall b, int steps) {
    for (int i = 0; i < steps; ++i) {
        RealBall a2 = (a + b).mul_rational(Rational(1, 2));
        RealBall b2 = (a * b).sqrt();
        a = a2;
        b = b2;
    }
    return RealBall::from_endpoints(b.lower().mid(), a.upper().mid(), a.prec());
}

} // namespace

TEST_CASE("pi against a Machin bracket") {
    // pi = 16 atan(1/5) - 4 atan(1/239), partial sums of the alternating
    // series bracket each atan
    auto atan_brackets = [](long x, int terms) {
        Rational lo(0), hi(0), s(0);
        for (int j = 0; j < terms; ++j) {
            Rational t(1, Int(2 * j + 1) * pow_int(Int(x), 2 * j + 1));
            t.canonicalize();
            if (j % 2 == 0) s += t; else s -= t;
            if (j == terms - 2) lo = s, hi = s;
        }
        // the last two partial sums bracket the limit
        if (terms % 2 == 0) return std::pair<Rational, Rational>(s, hi > s ? hi : lo);
        return std::pair<Rational, Rational>(lo < s ? lo : hi, s);
    };
    auto [lo5, hi5] = atan_brackets(5, 30);
    auto [lo239, hi239] = atan_brackets(239, 12);
    if (lo5 > hi5) std::swap(lo5, hi5);
    if (lo239 > hi239) std::swap(lo239, hi239);
    Rational lo = 16 * lo5 - 4 * hi239;
    Rational hi = 16 * hi5 - 4 * lo239;

    RealBall p = constant(ConstantKey::pi(), prec_for_digits(40));
    RealBall bracket = RealBall::from_endpoints(
        RealBall::from_rational(lo, 256).mid(), RealBall::from_rational(hi, 256).mid(), 256);
    CHECK(ball_compare(p, bracket, 30) == Verdict::CertifiedEqual);
    check_digits(p, "3.14159265358979323846264338327950288419716939937", 40);
}

TEST_CASE("log 2 against the atanh(1/3) series") {
    Rational s(0);
    int J = 40;
    for (int j = 0; j < J; ++j) {
        Rational t(2, Int(2 * j + 1) * pow_int(Int(3), 2 * j + 1));
        t.canonicalize();
        s += t;
    }
    Rational tail_ub = Rational(2, Int(2 * J + 1) * pow_int(Int(3), 2 * J + 1)) * Rational(9, 8);
    RealBall l = constant(ConstantKey::log_q(Rational(2)), prec_for_digits(40));
    // bracket [s, s+tail]
    RealBall lb = RealBall::from_rational(s, 256);
    RealBall ub = RealBall::from_rational(s + tail_ub, 256);
    CHECK(mpfr_cmp(l.upper().mid(), lb.mid()) >= 0);
    CHECK(mpfr_cmp(l.lower().mid(), ub.mid()) <= 0);
    check_digits(l, "0.6931471805599453094172321214581765680755001343", 40);
    CHECK(constant(ConstantKey::log_q(Rational(1)), 128).contains(Rational(0)));
}

TEST_CASE("zeta(2) equals pi^2/6 to full width") {
    for (int D : {20, 50, 100}) {
        mpfr_prec_t p = prec_for_digits(D);
        RealBall z2 = constant(ConstantKey::zeta(2), p);
        RealBall pp = constant(ConstantKey::pi(), p);
        RealBall ref = (pp * pp).mul_rational(Rational(1, 6));
        CHECK(z2.intersects(ref));
        CHECK(ball_compare(z2, ref, D - 3) == Verdict::CertifiedEqual);
    }
}

TEST_CASE("zeta odd values") {
    mpfr_prec_t p = prec_for_digits(50);
    RealBall z3 = constant(ConstantKey::zeta(3), p);
    check_digits(z3, "1.2020569031595942853997381615114499907649862923405", 45);
    RealBall z5 = constant(ConstantKey::zeta(5), p);
    check_digits(z5, "1.0369277551433699263313654864570341680570809195019", 45);

    // independent implementation: mpfr's zeta
    for (long n : {3, 5, 7}) {
        mpfr_t lo, hi;
        mpfr_init2(lo, p);
        mpfr_init2(hi, p);
        mpfr_zeta_ui(lo, static_cast<unsigned long>(n), MPFR_RNDD);
        mpfr_zeta_ui(hi, static_cast<unsigned long>(n), MPFR_RNDU);
        RealBall ref = RealBall::from_endpoints(lo, hi, p);
        mpfr_clears(lo, hi, nullptr);
        CHECK(constant(ConstantKey::zeta(n), p).intersects(ref));
    }
    CHECK_THROWS_AS(ConstantKey::zeta(1), std::domain_error);
}

TEST_CASE("beta values and Catalan") {
    mpfr_prec_t p = prec_for_digits(50);
    RealBall b1 = constant(ConstantKey::beta(1), p);
    CHECK(b1.intersects(constant(ConstantKey::pi(), p).mul_rational(Rational(1, 4))));

    RealBall g = constant(ConstantKey::catalan(), p);
    check_digits(g, "0.91596559417721901505460351493238411077414937428167", 45);
    CHECK(g.intersects(RealBall::catalan(p))); // mpfr's own Catalan constant
    CHECK(g.intersects(constant(ConstantKey::beta(2), p)));

    RealBall b4 = constant(ConstantKey::beta(4), p);
    check_digits(b4, "0.98894455174110533610842263322837782131586088706273", 45);
    // alternating series bracket at 10 digits
    Rational s(0);
    int J = 200;
    for (int j = 0; j < J; ++j) {
        Rational t(1, pow_int(Int(2 * j + 1), 4));
        t.canonicalize();
        if (j % 2 == 0) s += t; else s -= t;
    }
    Rational tail(1, pow_int(Int(2 * J + 1), 4));
    CHECK(ball_compare(b4, RealBall::from_rational(s, 128), 10) == Verdict::CertifiedEqual);
    CHECK(Rational(s - dec("0.9889445517")) != 0); // truncation differs beyond 10 digits
    (void)tail;
}

TEST_CASE("character L-values K and L") {
    mpfr_prec_t p = prec_for_digits(50);
    RealBall K = constant(ConstantKey::k3(), p);
    RealBall L = constant(ConstantKey::l8(), p);
    check_digits(K, "0.78130241289648629686718742962409235636513433654529", 45);
    check_digits(L, "1.0647341710435033703928274514616688894830991517745", 45);

    // naive partial sums with a trivial tail bound
    auto naive = [&](int modulus, auto chi) {
        mpfr_t acc, t;
        mpfr_init2(acc, 64);
        mpfr_init2(t, 64);
        mpfr_set_zero(acc, 1);
        long N = 1000000;
        for (long n = 1; n <= N; ++n) {
            int c = chi(n % modulus);
            if (!c) continue;
            mpfr_set_si(t, c, MPFR_RNDN);
            mpfr_div_ui(t, t, static_cast<unsigned long>(n), MPFR_RNDN);
            mpfr_div_ui(t, t, static_cast<unsigned long>(n), MPFR_RNDN);
            mpfr_add(acc, acc, t, MPFR_RNDN);
        }
        double v = mpfr_get_d(acc, MPFR_RNDN);
        mpfr_clears(acc, t, nullptr);
        return v;
    };
    double Kn = naive(3, [](long r) { return r == 1 ? 1 : (r == 2 ? -1 : 0); });
    double Ln = naive(8, [](long r) { return (r == 1 || r == 3) ? 1 : ((r == 5 || r == 7) ? -1 : 0); });
    CHECK(std::abs(mpfr_get_d(K.mid(), MPFR_RNDN) - Kn) < 4e-6);
    CHECK(std::abs(mpfr_get_d(L.mid(), MPFR_RNDN) - Ln) < 4e-6);
}

TEST_CASE("gamma at rational arguments") {
    mpfr_prec_t p = prec_for_digits(50);
    RealBall g14 = constant(ConstantKey::gamma_rat(Rational(1, 4)), p);
    check_digits(g14, "3.6256099082219083119306851558676720029951676828801", 45);

    // AGM route: Gamma(1/4) = sqrt((2 pi)^(3/2) / agm(1, sqrt 2))
    RealBall pi2 = constant(ConstantKey::pi(), p).mul_rational(Rational(2));
    RealBall num = (pi2 * pi2 * pi2).sqrt();
    RealBall ag = agm_ball(RealBall::exact_long(2, p).sqrt(), RealBall::exact_long(1, p), 12);
    RealBall viaagm = (num / ag).sqrt();
    CHECK(ball_compare(g14, viaagm, 40) == Verdict::CertifiedEqual);

    // Gamma(1/2)^2 = pi
    RealBall gh = detail::gamma_rational(Rational(1, 2), p);
    CHECK(ball_compare(gh * gh, constant(ConstantKey::pi(), p), 40) == Verdict::CertifiedEqual);

    // Gamma(1/4) Gamma(3/4) = pi sqrt(2)
    RealBall g34 = constant(ConstantKey::gamma_rat(Rational(3, 4)), p);
    RealBall ref = constant(ConstantKey::pi(), p) * RealBall::exact_long(2, p).sqrt();
    CHECK(ball_compare(g14 * g34, ref, 40) == Verdict::CertifiedEqual);

    // reflection at the four points used by congruence right-hand sides
    int D = 50;
    for (auto x : {Rational(1, 3), Rational(1, 4), Rational(5, 8), Rational(7, 12)}) {
        RealBall gx = constant(ConstantKey::gamma_rat(x), p);
        RealBall g1x = constant(ConstantKey::gamma_rat(Rational(1) - x), p);
        RealBall sin_px = (constant(ConstantKey::pi(), p) * RealBall::from_rational(x, p)).sin();
        RealBall val = gx * g1x * sin_px / constant(ConstantKey::pi(), p);
        CHECK(ball_compare(val, RealBall::exact_long(1, p), D - 5) == Verdict::CertifiedEqual);
    }

    // mpfr gamma as an extra independent check
    mpfr_t lo, hi, xq;
    mpfr_init2(lo, p);
    mpfr_init2(hi, p);
    mpfr_init2(xq, p);
    mpfr_set_q(xq, Rational(1, 3).get_mpq_t(), MPFR_RNDN);
    mpfr_gamma(lo, xq, MPFR_RNDD);
    mpfr_gamma(hi, xq, MPFR_RNDU);
    RealBall mref = RealBall::from_endpoints(lo, hi, p);
    mpfr_clears(lo, hi, xq, nullptr);
    CHECK(constant(ConstantKey::gamma_rat(Rational(1, 3)), p).intersects(mref));
}

TEST_CASE("doubling precision shrinks radii hard") {
    std::vector<ConstantKey> keys = {
        ConstantKey::pi(),       ConstantKey::zeta(3),      ConstantKey::beta(2),
        ConstantKey::k3(),       ConstantKey::l8(),         ConstantKey::catalan(),
        ConstantKey::log_q(Rational(2)), ConstantKey::sqrt_q(Rational(3)),
        ConstantKey::gamma_rat(Rational(1, 4)), ConstantKey::phi()};
    for (auto& k : keys) {
        RealBall lo = constant(k, 192);
        RealBall hi = constant(k, 384);
        CHECK(lo.intersects(hi));
        mpfr_t scaled;
        mpfr_init2(scaled, RealBall::kRadPrec);
        mpfr_mul_2ui(scaled, hi.rad(), 40, MPFR_RNDU);
        CHECK(mpfr_cmp(scaled, lo.rad()) <= 0);
        mpfr_clear(scaled);
    }
}

TEST_CASE("phi and sqrt") {
    mpfr_prec_t p = prec_for_digits(45);
    RealBall phi = constant(ConstantKey::phi(), p);
    check_digits(phi, "1.6180339887498948482045868343656381177203091798058", 40);
    RealBall s3 = constant(ConstantKey::sqrt_q(Rational(3)), p);
    CHECK((s3 * s3).contains(Rational(3)));
    CHECK_THROWS_AS(ConstantKey::log_q(Rational(0)), std::domain_error);
    CHECK_THROWS_AS(ConstantKey::gamma_rat(Rational(5, 4)), std::domain_error);
}

TEST_CASE("disk cache round trip") {
    auto dir = std::filesystem::temp_directory_path() / "certsum-cache-test";
    std::filesystem::remove_all(dir);
    ConstantCache::instance().set_dir(dir.string());
    RealBall a = constant(ConstantKey::zeta(3), 222);
    CHECK(ConstantCache::instance().disk_entries() >= 1);
    ConstantCache::instance().clear_memory();
    RealBall b = constant(ConstantKey::zeta(3), 222); // served from disk
    CHECK(ball_compare(a, b, 50) == Verdict::CertifiedEqual);
    ConstantCache::instance().clear_disk();
    CHECK(ConstantCache::instance().disk_entries() == 0);
    ConstantCache::instance().set_dir("");
}
