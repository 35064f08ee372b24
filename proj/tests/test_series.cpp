#include <catch2/catch_amalgamated.hpp>

#include "certsum/series.hpp"

#include <random>

using namespace certsum;

namespace {

Registry mini_registry() {
    static const char* text = R"(schema 1
[sequence hsy]
init = 1, 4, 20
lead = (n+1)^3
rec = 4*(2n+1)*(2*n^2+2n+1), -16*n*(4*n^2+1), 8*(2n-1)^3

[record APERY]
kind = identity
class = baseline
start = 1
limit = infinity
summand = (-1)^(k-1)/(k^3*C(2k,k))
rhs = 2/5*zeta(3)

[record BAUER]
kind = identity
class = baseline
start = 0
limit = infinity
summand = (4k+1)*C(2k,k)^3/(-64)^k
rhs = 2/pi

[record GOSPER]
kind = identity
class = baseline
start = 0
limit = infinity
summand = (25k-3)/(2^k*C(3k,k))
rhs = pi/2

[record HSY]
kind = identity
class = baseline
start = 0
limit = infinity
summand = (6k+1)*seq(hsy)/16^k
rhs = 16/pi

[record PERTURBED]
kind = identity
class = baseline
start = 0
limit = infinity
summand = (25k-3)/(2^k*C(3k,k))
rhs = pi/2+1/10^10
)";
    return Registry::from_text(text);
}

} // namespace

TEST_CASE("partial sums") {
    SummandExpr apery = parse_summand("(-1)^(k-1)/(k^3*C(2k,k))");
    RealBall s2 = partial_sum(apery, 1, 2, 128);
    CHECK(s2.contains(Rational(23, 48)));
    RealBall s1 = partial_sum(apery, 1, 1, 128);
    CHECK(s1.contains(Rational(1, 2)));
}

TEST_CASE("incremental cursor equals exact per-term summation at N=50") {
    std::vector<std::string> corpus = {
        "(-1)^(k-1)/(k^3*C(2k,k))",
        "(6k+1)*C(2k,k)^3/256^k*(H(2k,3)-7/64*H(k,3))",
        "C(4k,2k)*C(2k,k)/128^k*(2*H(4k)-H(2k))",
        "8^k*((10k-3)*(H(2k-1)-H(k-1))-1)/(k^3*C(2k,k)^2*C(3k,k))",
        "C(2k,k)^2*C(3k,k)^2*C(6k,3k)/10^(6k)*(3*(532*k^2+126*k+9)*(H(6k)-H(k))+532*k+63)",
        "C(3k,k)*((3+sqrt(5))/54)^k*(H(3k)-H(2k))",
    };
    for (auto& text : corpus) {
        SummandExpr s = parse_summand(text);
        long start = text.find("k-1") != std::string::npos ? 1 : 0;
        QuadValue exact(Rational(0));
        for (long k = start; k <= 50; ++k) exact = exact + eval_summand_exact(s, k);
        RealBall ball = partial_sum(s, start, 50, 192);
        RealBall er = quad_to_ball(exact, 256);
        INFO(text);
        CHECK(ball_compare(ball, er, 40) == Verdict::CertifiedEqual);
    }
    SummandExpr s = parse_summand("(6k+1)*C(2k,k)^3/256^k*(H(2k,3)-7/64*H(k,3))");
    SummandCursor<QuadOps> cur(s, 0, QuadOps{});
    for (long k = 0; k <= 50; ++k) {
        REQUIRE(cur.value() == eval_summand_exact(s, k));
        cur.advance();
    }
}

TEST_CASE("recurrence sequences") {
    Registry reg = mini_registry();
    auto& hsy = *reg.sequences.at("hsy");
    CHECK(hsy.value(0) == Rational(1));
    CHECK(hsy.value(2) == Rational(20));
    CHECK(hsy.value(3) == Rational(120));
    CHECK(hsy.value(10).get_den() == 1);
}

TEST_CASE("geometric summation certifies known values") {
    SummandExpr apery = parse_summand("(-1)^(k-1)/(k^3*C(2k,k))");
    SeriesEnclosure e = sum_to_tolerance(apery, 1, 25);
    REQUIRE(e.status == SumStatus::Converged);
    RealBall ref = constant(ConstantKey::zeta(3), 192).mul_rational(Rational(2, 5));
    CHECK(ball_compare(e.value, ref, 25) == Verdict::CertifiedEqual);

    SummandExpr arc = parse_summand("C(2k,k)/((2k+1)*16^k)");
    SeriesEnclosure a = sum_to_tolerance(arc, 0, 25);
    RealBall ref2 = constant(ConstantKey::pi(), 192).mul_rational(Rational(1, 3));
    CHECK(ball_compare(a.value, ref2, 25) == Verdict::CertifiedEqual);
}

TEST_CASE("planted geometric tails always contain the true value") {
    std::mt19937_64 rng(2024);
    int planted = 0;
    while (planted < 100) {
        long rn = static_cast<long>(rng() % 1800) - 900;
        long rd = 1000 + static_cast<long>(rng() % 500);
        if (rn == 0) continue;
        Rational r(rn, rd);
        r.canonicalize();
        Rational c(static_cast<long>(rng() % 2000) - 1000, 1 + static_cast<long>(rng() % 50));
        if (c == 0) continue;
        c.canonicalize();
        Rational a(static_cast<long>(rng() % 20) - 10, 1);

        SummandExpr s;
        Term t1;
        t1.coef = QuadValue(c);
        t1.base = QuadValue(r);
        s.terms.push_back(t1);
        if (a != 0) {
            Term t2;
            t2.coef = QuadValue(a);
            t2.kpow = 1;
            t2.base = QuadValue(r);
            s.terms.push_back(t2);
        }
        Rational one(1);
        Rational truth = c / (one - r) + a * r / ((one - r) * (one - r));
        SeriesEnclosure e = sum_to_tolerance(s, 0, 20);
        REQUIRE(e.status == SumStatus::Converged);
        REQUIRE(e.value.contains(truth));
        ++planted;
    }
}

TEST_CASE("alternating boundary engine: classification") {
    SummandExpr bauer = parse_summand("(4k+1)*C(2k,k)^3/(-64)^k");
    CHECK(asymptotic_ratio(bauer) == Catch::Approx(1.0));
    CHECK(alternating_engine_applies(bauer));

    SummandExpr geo = parse_summand("(6k+1)*C(2k,k)^3/(-512)^k");
    CHECK(asymptotic_ratio(geo) == Catch::Approx(0.125));
}

TEST_CASE("alternating boundary engine: Bauer") {
    SummandExpr bauer = parse_summand("(4k+1)*C(2k,k)^3/(-64)^k");
    SeriesEnclosure e = sum_to_tolerance(bauer, 0, 30);
    REQUIRE(e.status == SumStatus::Converged);
    RealBall ref = constant(ConstantKey::pi(), 256).reciprocal().mul_rational(Rational(2));
    INFO(e.value.str(40));
    CHECK(ball_compare(e.value, ref, 30) == Verdict::CertifiedEqual);
}

TEST_CASE("alternating boundary engine: bare central square") {
    SummandExpr s = parse_summand("C(2k,k)^2/(-16)^k");
    SeriesEnclosure e = sum_to_tolerance(s, 0, 30);
    REQUIRE(e.status == SumStatus::Converged);
    mpfr_prec_t p = 256;
    RealBall g = constant(ConstantKey::gamma_rat(Rational(1, 4)), p);
    RealBall tp = constant(ConstantKey::pi(), p).mul_rational(Rational(2));
    RealBall ref = g * g / (tp * tp.sqrt());
    CHECK(ball_compare(e.value, ref, 30) == Verdict::CertifiedEqual);
}

TEST_CASE("alternating boundary engine: Guillera -16G") {
    SummandExpr s = parse_summand("(4k-1)*(-64)^k/(k^3*C(2k,k)^3)");
    SeriesEnclosure e = sum_to_tolerance(s, 1, 30);
    REQUIRE(e.status == SumStatus::Converged);
    RealBall ref = -constant(ConstantKey::catalan(), 256).mul_rational(Rational(16));
    INFO(e.value.str(40));
    CHECK(ball_compare(e.value, ref, 30) == Verdict::CertifiedEqual);
}

TEST_CASE("alternating boundary engine: harmonic weights") {
    SummandExpr s = parse_summand("(4k+1)*C(2k,k)^3/(-64)^k*(H(2k,2)-1/2*H(k,2))");
    SeriesEnclosure e = sum_to_tolerance(s, 0, 30);
    REQUIRE(e.status == SumStatus::Converged);
    RealBall ref = -constant(ConstantKey::pi(), 256).mul_rational(Rational(1, 12));
    INFO(e.value.str(40));
    CHECK(ball_compare(e.value, ref, 30) == Verdict::CertifiedEqual);
}

TEST_CASE("verify_identity end to end") {
    Registry reg = mini_registry();
    auto v1 = verify_identity(*reg.find("APERY"), 30, reg);
    REQUIRE(v1.size() == 1);
    CHECK(v1[0].verdict == Verdict::CertifiedEqual);

    auto v2 = verify_identity(*reg.find("GOSPER"), 30, reg);
    CHECK(v2[0].verdict == Verdict::CertifiedEqual);

    auto v3 = verify_identity(*reg.find("HSY"), 25, reg);
    CHECK(v3[0].verdict == Verdict::CertifiedEqual);

    auto v4 = verify_identity(*reg.find("BAUER"), 30, reg);
    CHECK(v4[0].verdict == Verdict::CertifiedEqual);

    auto v5 = verify_identity(*reg.find("PERTURBED"), 30, reg);
    CHECK(v5[0].verdict == Verdict::CertifiedDistinct);
}

TEST_CASE("nested enclosures across digit targets") {
    Registry reg = mini_registry();
    for (const char* id : {"APERY", "GOSPER", "HSY", "BAUER"}) {
        const ConjectureRecord* r = reg.find(id);
        SummandExpr s = r->summand_for({});
        SeriesEnclosure lo = sum_to_tolerance(s, r->start, 20, reg.resolver());
        SeriesEnclosure hi = sum_to_tolerance(s, r->start, 40, reg.resolver());
        REQUIRE(lo.status == SumStatus::Converged);
        REQUIRE(hi.status == SumStatus::Converged);
        RealBall mid_hi = RealBall::from_endpoints(hi.value.mid(), hi.value.mid(), hi.value.prec());
        INFO(id);
        CHECK(lo.value.contains_ball(mid_hi));
    }
}

TEST_CASE("closed-form evaluator") {
    mpfr_prec_t p = 192;
    RealBall v = eval_closed_form(parse_expr("25*zeta(3)/(8*pi)-G", {}), 40, p, nullptr);
    RealBall ref = constant(ConstantKey::zeta(3), p).mul_rational(Rational(25, 8)) /
                       constant(ConstantKey::pi(), p) -
                   constant(ConstantKey::catalan(), p);
    CHECK(ball_compare(v, ref, 40) == Verdict::CertifiedEqual);

    SeriesFn fn = [&](const ExprPtr& inner, long start, int digits) {
        SummandExpr s = normalize_summand(inner);
        SeriesEnclosure e = sum_to_tolerance(s, start, digits + 4);
        REQUIRE(e.status == SumStatus::Converged);
        return e.value;
    };
    RealBall w = eval_closed_form(parse_expr("series(0, C(2k,k)/((2k+1)*16^k))", {}), 30, p, fn);
    RealBall pref = constant(ConstantKey::pi(), p).mul_rational(Rational(1, 3));
    CHECK(ball_compare(w, pref, 30) == Verdict::CertifiedEqual);
}

TEST_CASE("tail cap is a status, not an error") {
    SummandExpr s = parse_summand("C(4k,2k)/4^k");
    SumOptions opt;
    opt.n_max = 200;
    SeriesEnclosure e = sum_to_tolerance(s, 0, 10, nullptr, opt);
    CHECK(e.status == SumStatus::TailCapHit);
}
