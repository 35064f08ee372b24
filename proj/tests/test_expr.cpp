#include <catch2/catch_amalgamated.hpp>

#include "certsum/expr.hpp"
#include "certsum/summand.hpp"

#include <random>

using namespace certsum;

namespace {

// Independent direct interpreter over the raw AST (no normalization), used
// as the oracle for the normalized evaluator.
QuadValue naive_eval(const ExprPtr& e, long k) {
    using Op = Expr::Op;
    switch (e->op) {
        case Op::Num: return QuadValue(e->num);
        case Op::Var:
            if (e->name == "k") return QuadValue(Rational(k));
            throw std::domain_error("naive: free var");
        case Op::Neg: return -naive_eval(e->args[0], k);
        case Op::Add: return naive_eval(e->args[0], k) + naive_eval(e->args[1], k);
        case Op::Sub: return naive_eval(e->args[0], k) - naive_eval(e->args[1], k);
        case Op::Mul: return naive_eval(e->args[0], k) * naive_eval(e->args[1], k);
        case Op::Div: return naive_eval(e->args[0], k) / naive_eval(e->args[1], k);
        case Op::Pow: {
            QuadValue ex = naive_eval(e->args[1], k);
            if (!ex.is_rational()) throw std::domain_error("naive: surd exponent");
            auto n = as_integer(ex.a);
            REQUIRE(n.has_value());
            return naive_eval(e->args[0], k).pow(*to_long(*n));
        }
        case Op::Call: break;
    }
    const std::string& f = e->name;
    auto iarg = [&](size_t i) {
        QuadValue v = naive_eval(e->args[i], k);
        auto n = as_integer(v.a);
        REQUIRE(n.has_value());
        return *to_long(*n);
    };
    if (f == "C") return QuadValue(Rational(binomial(iarg(0), iarg(1))));
    if (f == "H") return QuadValue(harmonic(iarg(0), e->args.size() == 2 ? iarg(1) : 1));
    if (f == "AltH") {
        long n = iarg(0), m = iarg(1);
        Rational s(0);
        for (long j = 1; j <= n; ++j) {
            Rational t(1, pow_int(Int(j), m));
            t.canonicalize();
            s += (j % 2) ? -t : t;
        }
        return QuadValue(s);
    }
    if (f == "sqrt") {
        long n = iarg(0);
        long s = 1, d = n;
        for (long q = 2; q * q <= d; ++q)
            while (d % (q * q) == 0) {
                d /= q * q;
                s *= q;
            }
        if (d == 1) return QuadValue(Rational(s));
        return QuadValue(Rational(0), Rational(s), d);
    }
    throw std::domain_error("naive: function " + f);
}

} // namespace

TEST_CASE("parse the flagship summands") {
    SummandExpr s = parse_summand("(6k+1)*C(2k,k)^3/256^k*(H(2k,3)-7/64*H(k,3))");
    CHECK(s.terms.size() == 4);
    for (auto& t : s.terms) {
        REQUIRE(t.h.has_value());
        CHECK(t.h->m == 3);
        REQUIRE(t.binoms.size() == 1);
        CHECK(t.binoms[0].exp == 3);
        CHECK(t.base == QuadValue(Rational(1, 256)));
    }

    SummandExpr apery = parse_summand("(-1)^(k-1)/(k^3*C(2k,k))");
    CHECK(eval_summand_rational(apery, 2) == Rational(-1, 48));
    CHECK(eval_summand_rational(apery, 1) == Rational(1, 2));

    SummandExpr gosper = parse_summand("(25k-3)/(2^k*C(3k,k))");
    CHECK(eval_summand_rational(gosper, 0) == Rational(-3));
    CHECK(eval_summand_rational(gosper, 1) == Rational(11, 3));

    SummandExpr ram = parse_summand("(6k+1)*C(2k,k)^3/256^k");
    CHECK(eval_summand_rational(ram, 1) == Rational(7, 32));
}

TEST_CASE("alternating inner sums normalize to harmonic combinations") {
    SummandExpr a = parse_summand("AltH(2k,2)");
    SummandExpr b = parse_summand("1/2*H(k,2)-H(2k,2)");
    CHECK(print_summand(a) == print_summand(b));
    ExprPtr raw = parse_expr("AltH(2k,2)");
    for (long k = 1; k <= 30; ++k) {
        CHECK(eval_summand_rational(a, k) == eval_summand_rational(b, k));
        CHECK(QuadValue(eval_summand_rational(a, k)) == naive_eval(raw, k));
    }
}

TEST_CASE("quadratic surd bases") {
    SummandExpr s = parse_summand("C(3k,k)*((3+sqrt(5))/54)^k*(H(3k)-H(2k))");
    QuadValue v = eval_summand_exact(s, 1);
    // 3 * (3+sqrt5)/54 * (H_3 - H_2) = (3+sqrt5)/54
    Rational ea(1, 18), eb(1, 54);
    CHECK(v == QuadValue(ea, eb, 5));
    CHECK_THROWS_AS(eval_summand_rational(s, 1), std::domain_error);
}

TEST_CASE("parse errors carry position") {
    CHECK_THROWS_AS(parse_summand("(6k+1"), ParseError);
    CHECK_THROWS_AS(parse_summand("foo(2)"), ParseError);
    CHECK_THROWS_AS(parse_summand("k + * 2"), ParseError);
    CHECK_THROWS_MATCHES(parse_summand("H(k,12)"), std::domain_error,
                         Catch::Matchers::Message("unknown harmonic order"));
    CHECK_THROWS_MATCHES(parse_summand("C(2k)"), std::domain_error,
                         Catch::Matchers::Message("malformed binomial: C takes 2 arguments"));
    try {
        parse_summand("(6k+1");
        FAIL("expected throw");
    } catch (const ParseError& e) {
        CHECK(e.pos == 5);
    }
}

TEST_CASE("canonical print is a parse fixed point") {
    for (const char* text : {
             "(6k+1)*C(2k,k)^3/256^k*(H(2k,3)-7/64*H(k,3))",
             "(-1)^(k-1)/(k^3*C(2k,k))",
             "(25k-3)/(2^k*C(3k,k))",
             "C(2k,k)^2*C(3k,k)/(-216)^k*(3*H(3k)-H(k))",
             "8^k*((10k-3)*(H(2k-1)-H(k-1))-1)/(k^3*C(2k,k)^2*C(3k,k))",
             "(-1)^k*C(2k,k)^5*((205*k^2+160*k+32)*(H(2k)-H(k))+41*k+16)",
         }) {
        SummandExpr s = parse_summand(text);
        std::string once = print_summand(s);
        SummandExpr s2 = parse_summand(once);
        std::string twice = print_summand(s2);
        INFO(text << "\n -> " << once);
        CHECK(once == twice);
        CHECK(s.terms.size() == s2.terms.size());
        for (long k = 1; k <= 6; ++k)
            CHECK(eval_summand_exact(s, k) == eval_summand_exact(s2, k));
    }
}

TEST_CASE("normalized evaluator matches the naive interpreter") {
    std::vector<std::string> corpus = {
        "(6k+1)*C(2k,k)^3/256^k*(H(2k,3)-7/64*H(k,3))",
        "(21k-8)/(k^3*C(2k,k)^3)*(H(2k-1,2)-25/8*H(k-1,2))",
        "C(4k,2k)*C(2k,k)/128^k*(2*H(4k)-H(2k))",
        "(-1)^(k-1)/(k^3*C(2k,k))*(H(2k-1,2)-123/16*H(k-1,2))",
        "C(2k,k)^2/(-16)^k*(2*H(2k)-H(k))",
        "(8k+1)*C(2k,k)^2*C(4k,2k)/48^(2k)*(H(2k,2)-5/18*H(k,2))",
        "AltH(2k,2)*C(2k,k)^3*(4k+1)/(-64)^k",
        "C(2k,k)^2*C(3k,k)^2*C(6k,3k)/10^(6k)*(3*(532*k^2+126*k+9)*(H(6k)-H(k))+532*k+63)",
    };
    std::mt19937_64 rng(5);
    int checked = 0;
    while (checked < 1000) {
        for (auto& text : corpus) {
            long k = 1 + static_cast<long>(rng() % 40);
            ExprPtr ast = parse_expr(text);
            SummandExpr s = normalize_summand(ast);
            REQUIRE(eval_summand_exact(s, k) == naive_eval(ast, k));
            ++checked;
        }
    }
}

TEST_CASE("random summand round trips") {
    std::mt19937_64 rng(77);
    const long binom_menu[][2] = {{2, 1}, {3, 1}, {4, 2}, {6, 3}, {8, 4}};
    int done = 0;
    while (done < 6000) {
        SummandExpr s;
        int nterms = 1 + static_cast<int>(rng() % 3);
        for (int t = 0; t < nterms; ++t) {
            Term term;
            long cn = static_cast<long>(rng() % 199) - 99;
            if (cn == 0) cn = 7;
            Rational coef(cn, 1 + static_cast<long>(rng() % 40));
            coef.canonicalize();
            term.coef = QuadValue(coef);
            term.kpow = static_cast<long>(rng() % 7) - 3;
            int nb = static_cast<int>(rng() % 3);
            for (int b = 0; b < nb; ++b) {
                auto& m = binom_menu[rng() % 5];
                long e = static_cast<long>(rng() % 3) + 1;
                if (rng() % 2) e = -e;
                detail_summand::merge_binom(term.binoms, {m[0], 0, m[1], 0, e});
            }
            std::erase_if(term.binoms, [](const BinomFactor& b) { return b.exp == 0; });
            std::sort(term.binoms.begin(), term.binoms.end());
            long bn = static_cast<long>(rng() % 1000) - 500;
            if (bn == 0) bn = 3;
            Rational base(bn, 1 + static_cast<long>(rng() % 500));
            base.canonicalize();
            term.base = QuadValue(base);
            if (rng() % 2) {
                int c = static_cast<int>(rng() % 4) + 1;
                term.h = HFactor{c, (rng() % 2) ? -1L : 0L, static_cast<int>(rng() % 3) + 1};
            }
            s.terms.push_back(term);
        }
        // one canonicalization pass, then a fixed point
        SummandExpr canon = parse_summand(print_summand(s));
        std::string text = print_summand(canon);
        SummandExpr back = parse_summand(text);
        INFO(text);
        REQUIRE(print_summand(back) == text);
        for (long k = 1; k <= 3; ++k)
            REQUIRE(eval_summand_exact(back, k) == eval_summand_exact(s, k));
        ++done;
    }
}

TEST_CASE("random closed-form round trips") {
    std::mt19937_64 rng(123);
    std::function<ExprPtr(int)> gen = [&](int depth) -> ExprPtr {
        if (depth == 0 || rng() % 4 == 0) {
            switch (rng() % 6) {
                case 0: {
                    Rational q(static_cast<long>(rng() % 30) + 1,
                               static_cast<long>(rng() % 9) + 1);
                    q.canonicalize();
                    return Expr::number(q);
                }
                case 1: return Expr::call("pi", {});
                case 2: return Expr::call("zeta", {Expr::number(Rational(3))});
                case 3: return Expr::call("G", {});
                case 4: return Expr::call("sqrt", {Expr::number(Rational(2))});
                default: return Expr::call("Gamma", {Expr::number(Rational(1, 4))});
            }
        }
        switch (rng() % 6) {
            case 0: return Expr::node(Expr::Op::Add, {gen(depth - 1), gen(depth - 1)});
            case 1: return Expr::node(Expr::Op::Sub, {gen(depth - 1), gen(depth - 1)});
            case 2: return Expr::node(Expr::Op::Mul, {gen(depth - 1), gen(depth - 1)});
            case 3: return Expr::node(Expr::Op::Div, {gen(depth - 1), gen(depth - 1)});
            case 4: return Expr::node(Expr::Op::Neg, {gen(depth - 1)});
            default:
                return Expr::node(Expr::Op::Pow,
                                  {gen(depth - 1),
                                   Expr::number(Rational(static_cast<long>(rng() % 4) + 2))});
        }
    };
    for (int i = 0; i < 4000; ++i) {
        ExprPtr e = gen(3);
        std::string text = print_expr(e);
        ExprPtr back = parse_expr(text, {});
        INFO(text);
        REQUIRE(expr_equal(fold_constants(back), fold_constants(e)));
    }
}

TEST_CASE("substitution") {
    ExprPtr e = parse_expr("C(4k,2k)*(x*(1-x)/4)^k*(2*H(4k)-3*H(2k)+H(k))", {"k", "x"});
    ExprPtr inst = substitute(e, {{"x", Rational(1, 4)}});
    SummandExpr s = normalize_summand(inst);
    bool found = false;
    for (auto& t : s.terms)
        if (t.base == QuadValue(Rational(3, 64))) found = true;
    CHECK(found);
}
