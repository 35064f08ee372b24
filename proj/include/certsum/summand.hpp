#pragma once

#include "certsum/exact.hpp"
#include "certsum/expr.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <sstream>
#include <tuple>

namespace certsum {

// Resolves named recurrence sequences (a_k by name) to exact values.
using SeqResolver = std::function<Rational(const std::string&, long)>;

struct BinomFactor {
    long a, a0, b, b0; // C(a k + a0, b k + b0)
    long exp;
    auto key() const { return std::tie(a, a0, b, b0); }
    bool operator<(const BinomFactor& o) const { return key() < o.key(); }
    bool operator==(const BinomFactor& o) const { return key() == o.key() && exp == o.exp; }
};

struct HFactor {
    long c, d; // H_{c k + d}
    int m;     // order
    auto key() const { return std::tie(c, d, m); }
};

// (c k + d)^exp factor with c != 0 (plain powers of k live in Term::kpow)
struct LinPow {
    long c, d;
    long exp;
    auto key() const { return std::tie(c, d); }
    bool operator<(const LinPow& o) const { return key() < o.key(); }
    bool operator==(const LinPow& o) const { return key() == o.key() && exp == o.exp; }
};

// One normalized monomial: coef * k^kpow * prod C(..)^e * base^k * H(..) * seq.
struct Term {
    QuadValue coef = QuadValue(Rational(1));
    long kpow = 0;
    std::vector<BinomFactor> binoms;
    std::vector<LinPow> linfactors;
    QuadValue base = QuadValue(Rational(1));
    std::optional<HFactor> h;
    std::string seq;

    auto shape_key() const {
        std::ostringstream os;
        os << kpow << "|";
        for (auto& b : binoms)
            os << b.a << "," << b.a0 << "," << b.b << "," << b.b0 << "^" << b.exp << ";";
        os << "|";
        for (auto& l : linfactors) os << l.c << "," << l.d << "^" << l.exp << ";";
        os << "|" << base.str() << "|";
        if (h) os << h->c << "," << h->d << "," << h->m;
        os << "|" << seq;
        return os.str();
    }
};

// Sum of normalized monomials, all over one quadratic field.
struct SummandExpr {
    std::vector<Term> terms;

    bool has_seq() const {
        for (auto& t : terms)
            if (!t.seq.empty()) return true;
        return false;
    }
    bool is_rational_only() const {
        for (auto& t : terms)
            if (!t.coef.is_rational() || !t.base.is_rational()) return false;
        return true;
    }
};

namespace detail_summand {

inline void merge_binom(std::vector<BinomFactor>& dst, const BinomFactor& f) {
    for (auto& g : dst) {
        if (g.key() == f.key()) {
            g.exp += f.exp;
            return;
        }
    }
    dst.push_back(f);
}

inline Term mul_terms(const Term& x, const Term& y) {
    if (x.h && y.h) throw std::domain_error("nonlinear harmonic product unsupported");
    if (!x.seq.empty() && !y.seq.empty())
        throw std::domain_error("multiple sequence references unsupported");
    Term r;
    r.coef = x.coef * y.coef;
    r.kpow = x.kpow + y.kpow;
    r.binoms = x.binoms;
    for (auto& b : y.binoms) merge_binom(r.binoms, b);
    std::erase_if(r.binoms, [](const BinomFactor& b) { return b.exp == 0; });
    std::sort(r.binoms.begin(), r.binoms.end());
    r.linfactors = x.linfactors;
    for (auto& l : y.linfactors) {
        bool merged = false;
        for (auto& g : r.linfactors)
            if (g.key() == l.key()) {
                g.exp += l.exp;
                merged = true;
                break;
            }
        if (!merged) r.linfactors.push_back(l);
    }
    std::erase_if(r.linfactors, [](const LinPow& l) { return l.exp == 0; });
    std::sort(r.linfactors.begin(), r.linfactors.end());
    r.base = x.base * y.base;
    r.h = x.h ? x.h : y.h;
    r.seq = x.seq.empty() ? y.seq : x.seq;
    return r;
}

inline Term invert_term(const Term& x) {
    if (x.h || !x.seq.empty())
        throw std::domain_error("cannot divide by harmonic or sequence factors");
    Term r;
    r.coef = x.coef.inverse();
    r.kpow = -x.kpow;
    r.binoms = x.binoms;
    for (auto& b : r.binoms) b.exp = -b.exp;
    r.linfactors = x.linfactors;
    for (auto& l : r.linfactors) l.exp = -l.exp;
    r.base = x.base.inverse();
    return r;
}

inline std::vector<Term> add_polys(std::vector<Term> a, const std::vector<Term>& b) {
    for (auto& t : b) {
        bool merged = false;
        for (auto& u : a) {
            if (u.shape_key() == t.shape_key()) {
                u.coef = u.coef + t.coef;
                merged = true;
                break;
            }
        }
        if (!merged) a.push_back(t);
    }
    std::erase_if(a, [](const Term& t) { return t.coef.is_zero(); });
    return a;
}

inline std::vector<Term> mul_polys(const std::vector<Term>& a, const std::vector<Term>& b) {
    std::vector<Term> out;
    for (auto& x : a)
        for (auto& y : b) out = add_polys(std::move(out), {mul_terms(x, y)});
    return out;
}

// Linear integer form c*k + d from a normalized constant/k-linear poly.
struct LinForm {
    long c, d;
};

inline LinForm lin_of(const std::vector<Term>& p, const char* what) {
    long c = 0, d = 0;
    for (auto& t : p) {
        if (!t.binoms.empty() || !t.base.is_rational() || t.base.a != 1 || t.h || !t.seq.empty() ||
            !t.coef.is_rational())
            throw std::domain_error(std::string("malformed ") + what + ": not linear in k");
        auto n = as_integer(t.coef.a);
        if (!n || !to_long(*n))
            throw std::domain_error(std::string("malformed ") + what + ": non-integer coefficient");
        if (t.kpow == 0) d += *to_long(*n);
        else if (t.kpow == 1) c += *to_long(*n);
        else throw std::domain_error(std::string("malformed ") + what + ": degree > 1");
    }
    return {c, d};
}

inline std::vector<Term> const_poly(const QuadValue& q) {
    Term t;
    t.coef = q;
    if (q.is_zero()) return {};
    return {t};
}

inline std::vector<Term> normalize_rec(const ExprPtr& e) {
    using Op = Expr::Op;
    switch (e->op) {
        case Op::Num: return const_poly(QuadValue(e->num));
        case Op::Var:
            if (e->name == "k") {
                Term t;
                t.kpow = 1;
                return {t};
            }
            throw std::domain_error("free variable '" + e->name + "' in summand");
        case Op::Neg: {
            auto p = normalize_rec(e->args[0]);
            for (auto& t : p) t.coef = -t.coef;
            return p;
        }
        case Op::Add: return add_polys(normalize_rec(e->args[0]), normalize_rec(e->args[1]));
        case Op::Sub: {
            auto b = normalize_rec(e->args[1]);
            for (auto& t : b) t.coef = -t.coef;
            return add_polys(normalize_rec(e->args[0]), b);
        }
        case Op::Mul: return mul_polys(normalize_rec(e->args[0]), normalize_rec(e->args[1]));
        case Op::Div: {
            auto d = normalize_rec(e->args[1]);
            if (d.size() != 1) {
                // allow division by (common monomial) * (linear form in k):
                // all terms must agree except for coef and k power
                Term common = d[0];
                for (auto& t : d) {
                    if (t.kpow < common.kpow) common.kpow = t.kpow;
                    if (t.binoms != common.binoms || !(t.base == common.base) || t.h ||
                        !t.seq.empty() || t.linfactors != common.linfactors ||
                        !t.coef.is_rational())
                        throw std::domain_error("division by a sum of terms");
                }
                Rational slope(0), icept(0);
                for (auto& t : d) {
                    long rel = t.kpow - common.kpow;
                    if (rel == 0) icept += t.coef.a;
                    else if (rel == 1) slope += t.coef.a;
                    else throw std::domain_error("malformed denominator: not linear in k");
                }
                if (slope == 0) throw std::domain_error("division by a sum of terms");
                // (slope k + icept) = (c k + d0) / q with integer c, d0
                Int q;
                mpz_lcm(q.get_mpz_t(), slope.get_den().get_mpz_t(), icept.get_den().get_mpz_t());
                auto c_i = to_long(Int(Rational(slope * Rational(q)).get_num()));
                auto d_i = to_long(Int(Rational(icept * Rational(q)).get_num()));
                if (!c_i || !d_i) throw std::domain_error("linear denominator out of range");
                common.coef = QuadValue(Rational(1));
                Term inv = invert_term(common);
                inv.coef = inv.coef * QuadValue(Rational(q));
                bool merged = false;
                for (auto& l : inv.linfactors)
                    if (l.c == *c_i && l.d == *d_i) {
                        --l.exp;
                        merged = true;
                    }
                if (!merged) inv.linfactors.push_back({*c_i, *d_i, -1});
                std::erase_if(inv.linfactors, [](const LinPow& l) { return l.exp == 0; });
                std::sort(inv.linfactors.begin(), inv.linfactors.end());
                return mul_polys(normalize_rec(e->args[0]), {inv});
            }
            return mul_polys(normalize_rec(e->args[0]), {invert_term(d[0])});
        }
        case Op::Pow: {
            auto base = normalize_rec(e->args[0]);
            // exponent: integer constant, or integer-linear in k (then base must
            // be a constant; contributes base^d to coef and base^c to the ratio)
            ExprPtr ex = fold_constants(e->args[1]);
            if (ex->op == Op::Num) {
                auto n = as_integer(ex->num);
                if (!n || !to_long(*n)) throw std::domain_error("non-integer exponent");
                long p = *to_long(*n);
                if (p >= 0) {
                    std::vector<Term> acc = const_poly(QuadValue(Rational(1)));
                    std::vector<Term> sq = base;
                    long n2 = p;
                    while (n2) {
                        if (n2 & 1) acc = mul_polys(acc, sq);
                        if (n2 >>= 1) sq = mul_polys(sq, sq);
                    }
                    return acc;
                }
                if (base.size() != 1) throw std::domain_error("negative power of a sum");
                Term inv = invert_term(base[0]);
                std::vector<Term> acc = const_poly(QuadValue(Rational(1)));
                for (long i = 0; i < -p; ++i) acc = mul_polys(acc, {inv});
                return acc;
            }
            // k-linear exponent
            LinForm lf = lin_of(normalize_rec(ex), "exponent");
            if (base.size() != 1 || base[0].kpow != 0 || !base[0].binoms.empty() ||
                base[0].h || !base[0].seq.empty() || !(base[0].base == QuadValue(Rational(1))))
                throw std::domain_error("geometric base must be a constant");
            QuadValue c = base[0].coef;
            Term t;
            t.base = c.pow(lf.c);
            t.coef = c.pow(lf.d);
            return {t};
        }
        case Op::Call: break;
    }
    const std::string& f = e->name;
    auto lin_arg = [&](size_t i, const char* what) {
        return lin_of(normalize_rec(e->args[i]), what);
    };
    auto int_arg = [&](size_t i, const char* what) -> long {
        ExprPtr a = fold_constants(e->args[i]);
        if (a->op != Expr::Op::Num) throw std::domain_error(std::string(what) + ": expected integer");
        auto n = as_integer(a->num);
        if (!n || !to_long(*n)) throw std::domain_error(std::string(what) + ": expected integer");
        return *to_long(*n);
    };
    if (f == "C") {
        if (e->args.size() != 2) throw std::domain_error("malformed binomial: C takes 2 arguments");
        Term t;
        LinForm top = lin_arg(0, "binomial"), bot = lin_arg(1, "binomial");
        t.binoms.push_back({top.c, top.d, bot.c, bot.d, 1});
        return {t};
    }
    if (f == "H") {
        if (e->args.empty() || e->args.size() > 2)
            throw std::domain_error("H takes 1 or 2 arguments");
        long m = e->args.size() == 2 ? int_arg(1, "harmonic order") : 1;
        if (m < 1 || m > 9) throw std::domain_error("unknown harmonic order");
        LinForm idx = lin_arg(0, "harmonic index");
        Term t;
        t.h = HFactor{idx.c, idx.d, static_cast<int>(m)};
        return {t};
    }
    if (f == "AltH") {
        // sum_{j=1}^{ck+d} (-1)^j / j^m with even linear form = 2^(1-m) H_{(c/2)k + d/2}^{(m)} - H_{ck+d}^{(m)}
        if (e->args.size() != 2) throw std::domain_error("AltH takes 2 arguments");
        long m = int_arg(1, "harmonic order");
        if (m < 1 || m > 9) throw std::domain_error("unknown harmonic order");
        LinForm idx = lin_arg(0, "alternating-sum limit");
        if (idx.c % 2 || idx.d % 2)
            throw std::domain_error("AltH limit must be an even linear form");
        Term half, full;
        half.h = HFactor{idx.c / 2, idx.d / 2, static_cast<int>(m)};
        half.coef = QuadValue(pow_rational(Rational(2), 1 - m));
        full.h = HFactor{idx.c, idx.d, static_cast<int>(m)};
        full.coef = QuadValue(Rational(-1));
        return {half, full};
    }
    if (f == "sqrt") {
        long n = int_arg(0, "sqrt");
        if (n < 0) throw std::domain_error("sqrt of negative integer in summand");
        // split square part
        long s = 1, d = n;
        for (long q = 2; q * q <= d; ++q)
            while (d % (q * q) == 0) {
                d /= q * q;
                s *= q;
            }
        if (d == 1) return const_poly(QuadValue(Rational(s)));
        return const_poly(QuadValue(Rational(0), Rational(s), d));
    }
    if (f == "seq") {
        if (e->args.size() != 1 || e->args[0]->op != Expr::Op::Var)
            throw std::domain_error("seq takes a sequence name");
        Term t;
        t.seq = e->args[0]->name;
        return {t};
    }
    throw std::domain_error("'" + f + "' is not valid inside a summand");
}

} // namespace detail_summand

inline SummandExpr normalize_summand(const ExprPtr& e) {
    SummandExpr s;
    s.terms = detail_summand::normalize_rec(fold_constants(e));
    long d = 0;
    for (auto& t : s.terms) {
        for (long dd : {t.coef.d, t.base.d}) {
            if (dd == 0) continue;
            if (d == 0) d = dd;
            else if (d != dd) throw std::domain_error("mixed quadratic surds in summand");
        }
        if (t.kpow < -7) throw std::domain_error("k-power below supported range");
        if (t.h && (t.h->c < 0 || t.h->c > 8))
            throw std::domain_error("harmonic index slope out of range");
    }
    // canonical order
    std::sort(s.terms.begin(), s.terms.end(), [](const Term& a, const Term& b) {
        return a.shape_key() < b.shape_key();
    });
    return s;
}

inline SummandExpr parse_summand(const std::string& text,
                                 const std::map<std::string, Rational>& params = {}) {
    std::set<std::string> vars = {"k"};
    for (auto& [n, v] : params) vars.insert(n);
    ExprPtr ast = parse_expr(text, vars);
    if (!params.empty()) ast = substitute(ast, params);
    return normalize_summand(ast);
}

// -------- printing (canonical) --------

namespace detail_summand {

inline std::string print_lin(long c, long d) {
    std::ostringstream os;
    if (c == 0) {
        os << d;
        return os.str();
    }
    if (c == 1) os << "k";
    else os << c << "*k";
    if (d > 0) os << "+" << d;
    else if (d < 0) os << d;
    return os.str();
}

inline std::string print_quad(const QuadValue& q) {
    if (q.is_rational()) return q.a.get_str();
    std::ostringstream os;
    os << "(";
    if (q.a != 0) os << q.a.get_str() << (q.b > 0 ? "+" : "");
    if (q.b == 1) os << "sqrt(" << q.d << ")";
    else if (q.b == -1) os << "-sqrt(" << q.d << ")";
    else os << q.b.get_str() << "*sqrt(" << q.d << ")";
    os << ")";
    return os.str();
}

} // namespace detail_summand

inline std::string print_summand(const SummandExpr& s) {
    using namespace detail_summand;
    if (s.terms.empty()) return "0";
    std::ostringstream os;
    bool first = true;
    for (auto& t : s.terms) {
        QuadValue c = t.coef;
        bool neg = c.is_rational() && c.a < 0;
        if (neg) c = -c;
        if (first) {
            if (neg) os << "-";
        } else {
            os << (neg ? "-" : "+");
        }
        first = false;

        std::vector<std::string> num, den;
        if (!(c == QuadValue(Rational(1)))) {
            if (c.is_rational() && c.a.get_den() != 1 && c.a.get_num() == 1) {
                den.push_back(Rational(c.a.get_den()).get_str());
            } else {
                num.push_back(print_quad(c));
            }
        }
        if (t.kpow > 0) num.push_back(t.kpow == 1 ? "k" : "k^" + std::to_string(t.kpow));
        if (t.kpow < 0)
            den.push_back(t.kpow == -1 ? "k" : "k^" + std::to_string(-t.kpow));
        for (auto& l : t.linfactors) {
            std::string s0 = "(" + print_lin(l.c, l.d) + ")";
            long e = l.exp > 0 ? l.exp : -l.exp;
            if (e > 1) s0 += "^" + std::to_string(e);
            (l.exp > 0 ? num : den).push_back(s0);
        }
        for (auto& b : t.binoms) {
            std::string s0 = "C(" + print_lin(b.a, b.a0) + "," + print_lin(b.b, b.b0) + ")";
            long e = b.exp;
            if (e > 1) s0 += "^" + std::to_string(e);
            if (e < -1) s0 += "^" + std::to_string(-e);
            (e > 0 ? num : den).push_back(s0);
        }
        if (!(t.base == QuadValue(Rational(1)))) {
            QuadValue b = t.base;
            bool inv = b.is_rational() && b.a.get_num() == 1 && b.a.get_den() != 1;
            if (inv) {
                den.push_back(Rational(b.a.get_den()).get_str() + "^k");
            } else if (b.is_rational()) {
                std::string bs = b.a.get_str();
                if (b.a < 0 || b.a.get_den() != 1) bs = "(" + bs + ")";
                num.push_back(bs + "^k");
            } else {
                num.push_back(print_quad(b) + "^k");
            }
        }
        if (!t.seq.empty()) num.push_back("seq(" + t.seq + ")");
        if (t.h)
            num.push_back("H(" + print_lin(t.h->c, t.h->d) + "," + std::to_string(t.h->m) + ")");
        if (num.empty()) num.push_back("1");
        for (size_t i = 0; i < num.size(); ++i) os << (i ? "*" : "") << num[i];
        for (auto& d : den) os << "/" << d;
    }
    return os.str();
}

// -------- exact evaluation --------

// Direct per-term evaluation; this is the reference the incremental paths
// are checked against.
inline QuadValue eval_summand_exact(const SummandExpr& s, long k,
                                    const SeqResolver& seqs = nullptr) {
    QuadValue total(Rational(0));
    for (auto& t : s.terms) {
        QuadValue v = t.coef;
        if (t.kpow != 0) {
            if (k == 0 && t.kpow < 0) throw std::domain_error("term undefined at k = 0");
            v = v * QuadValue(pow_rational(Rational(k), t.kpow));
        }
        for (auto& b : t.binoms) {
            Int bin = binomial(b.a * k + b.a0, b.b * k + b.b0);
            if (bin == 0 && b.exp < 0)
                throw std::domain_error("zero binomial in denominator");
            if (bin == 0) {
                v = QuadValue(Rational(0));
                break;
            }
            v = v * QuadValue(pow_rational(Rational(bin), b.exp));
        }
        for (auto& l : t.linfactors) {
            Rational lv(l.c * k + l.d);
            if (lv == 0) throw std::domain_error("vanishing linear factor");
            v = v * QuadValue(pow_rational(lv, l.exp));
        }
        if (v.is_zero()) continue;
        v = v * t.base.pow(k);
        if (t.h) {
            long idx = t.h->c * k + t.h->d;
            if (idx < 0) throw std::domain_error("negative harmonic index");
            v = v * QuadValue(harmonic(idx, t.h->m));
        }
        if (!t.seq.empty()) {
            if (!seqs) throw std::domain_error("sequence reference without resolver");
            v = v * QuadValue(seqs(t.seq, k));
        }
        total = total + v;
    }
    return total;
}

inline Rational eval_summand_rational(const SummandExpr& s, long k,
                                      const SeqResolver& seqs = nullptr) {
    QuadValue v = eval_summand_exact(s, k, seqs);
    if (!v.is_rational()) throw std::domain_error("summand value is irrational");
    return v.a;
}

// Ratio of the hypergeometric part between k and k+1 (excludes H and seq),
// as an exact field element: base * ((k+1)/k)^kpow * prod(binom ratios).
inline QuadValue term_ratio(const Term& t, long k) {
    QuadValue r = t.base;
    if (t.kpow != 0)
        r = r * QuadValue(pow_rational(Rational(k + 1, k), t.kpow));
    for (auto& l : t.linfactors) {
        Rational cur(l.c * k + l.d), nxt(l.c * (k + 1) + l.d);
        if (cur == 0 || nxt == 0) throw std::domain_error("linear factor through zero");
        r = r * QuadValue(pow_rational(nxt / cur, l.exp));
    }
    for (auto& b : t.binoms) {
        Rational num(1), den(1);
        long a = b.a, bb = b.b, c = a - bb;
        for (long i = 1; i <= a; ++i) num *= Rational(a * k + b.a0 + i);
        for (long i = 1; i <= bb; ++i) den *= Rational(bb * k + b.b0 + i);
        for (long i = 1; i <= c; ++i) den *= Rational(c * k + (b.a0 - b.b0) + i);
        if (num == 0 || den == 0) throw std::domain_error("binomial ratio through zero");
        r = r * QuadValue(pow_rational(num / den, b.exp));
    }
    return r;
}

// Increment of H_{c k + d}^{(m)} from k to k+1.
inline Rational h_increment(const HFactor& h, long k) {
    Rational inc(0);
    for (long i = h.c * k + h.d + 1; i <= h.c * (k + 1) + h.d; ++i) {
        Rational t(1, pow_int(Int(i), h.m));
        t.canonicalize();
        inc += t;
    }
    return inc;
}

// Certified upper bound for sup_{j >= N} |term(j+1)/term(j)|, from the
// monotonicity of each linear-fraction factor (each factor's sup on [N, inf)
// is attained at N or in the limit). Sequence factors have no structural
// bound; callers fall back to an observed-ratio window for those.
inline std::optional<Rational> structural_ratio_sup(const Term& t, long N) {
    if (!t.seq.empty()) return std::nullopt;
    if (N < 1) return std::nullopt;
    // |base| upper bound (integer sqrt bound for surds)
    Rational sup;
    {
        Rational ab = t.base.a >= 0 ? t.base.a : Rational(-t.base.a);
        if (t.base.d != 0) {
            Rational bb = t.base.b >= 0 ? t.base.b : Rational(-t.base.b);
            long r = static_cast<long>(std::sqrt(double(t.base.d))) + 1;
            ab += bb * Rational(r);
        }
        sup = ab;
    }
    auto pair_sup = [&](long alpha, long beta, long gamma, long delta) -> Rational {
        // (alpha j + beta)/(gamma j + delta) on [N, inf), all values positive
        Rational at_n(alpha * N + beta, gamma * N + delta);
        at_n.canonicalize();
        Rational lim(alpha, gamma);
        lim.canonicalize();
        return at_n > lim ? at_n : lim;
    };
    for (auto& b : t.binoms) {
        long a = b.a, bb = b.b, c = a - bb;
        if (bb <= 0 || c <= 0) return std::nullopt;
        std::vector<std::pair<long, long>> nums, dens;
        for (long i = 1; i <= a; ++i) nums.push_back({a, b.a0 + i});
        for (long i = 1; i <= bb; ++i) dens.push_back({bb, b.b0 + i});
        for (long i = 1; i <= c; ++i) dens.push_back({c, b.a0 - b.b0 + i});
        for (size_t i = 0; i < nums.size(); ++i) {
            long e = b.exp;
            Rational ps = e > 0 ? pair_sup(nums[i].first, nums[i].second, dens[i].first,
                                           dens[i].second)
                                : pair_sup(dens[i].first, dens[i].second, nums[i].first,
                                           nums[i].second);
            long reps = e > 0 ? e : -e;
            for (long r = 0; r < reps; ++r) sup *= ps;
        }
        // positivity of every factor at N
        for (auto& [al, be] : nums)
            if (al * N + be <= 0) return std::nullopt;
        for (auto& [al, be] : dens)
            if (al * N + be <= 0) return std::nullopt;
    }
    if (t.kpow > 0)
        sup *= pow_rational(Rational(N + 1, N), t.kpow);
    for (auto& l : t.linfactors) {
        if (l.c * N + l.d <= 0) return std::nullopt;
        if (l.exp > 0)
            sup *= pow_rational(pair_sup(l.c, l.c + l.d, l.c, l.d), l.exp);
        // decreasing for exp < 0: bounded by 1
    }
    if (t.h) {
        long idx = t.h->c * N + t.h->d;
        if (idx <= 0) return std::nullopt;
        Rational h = harmonic(idx, t.h->m);
        sup *= Rational(1) + h_increment(*t.h, N) / h;
    }
    return sup;
}

// Hypergeometric part of a term (everything except H and seq), exact.
inline QuadValue term_hyper_exact(const Term& t, long k) {
    QuadValue v = t.coef;
    if (t.kpow != 0) {
        if (k == 0 && t.kpow < 0) throw std::domain_error("term undefined at k = 0");
        v = v * QuadValue(pow_rational(Rational(k), t.kpow));
    }
    for (auto& b : t.binoms) {
        Int bin = binomial(b.a * k + b.a0, b.b * k + b.b0);
        if (bin == 0 && b.exp < 0) throw std::domain_error("zero binomial in denominator");
        if (bin == 0) return QuadValue(Rational(0));
        v = v * QuadValue(pow_rational(Rational(bin), b.exp));
    }
    for (auto& l : t.linfactors) {
        Rational lv(l.c * k + l.d);
        if (lv == 0) throw std::domain_error("vanishing linear factor");
        v = v * QuadValue(pow_rational(lv, l.exp));
    }
    return v * t.base.pow(k);
}

// Incremental evaluation over an arbitrary value domain. Ops must provide:
//   using V = ...;
//   V from_rational(const Rational&) const;
//   V from_quad(const QuadValue&) const;
// and V must support +, *.
template <class Ops>
class SummandCursor {
  public:
    using V = typename Ops::V;

    SummandCursor(const SummandExpr& s, long start, Ops ops, SeqResolver seqs = nullptr)
        : s_(&s), ops_(std::move(ops)), seqs_(std::move(seqs)), k_(start) {
        states_.resize(s.terms.size());
        for (size_t i = 0; i < s.terms.size(); ++i) reset_term(i);
    }

    long k() const { return k_; }

    size_t term_count() const { return states_.size(); }

    V term_value(size_t i) const {
        const Term& t = s_->terms[i];
        V v = states_[i].hyper;
        if (t.h) v = v * states_[i].hval;
        if (!t.seq.empty()) v = v * states_[i].seqval;
        return v;
    }

    // Value of the full summand at the current k.
    V value() const {
        V total = ops_.from_rational(Rational(0));
        for (size_t i = 0; i < states_.size(); ++i) total = total + term_value(i);
        return total;
    }

    void advance() {
        long k = k_;
        ++k_;
        for (size_t i = 0; i < states_.size(); ++i) {
            const Term& t = s_->terms[i];
            if (k < 1 || states_[i].direct_next) {
                reset_term(i);
                continue;
            }
            states_[i].hyper = states_[i].hyper * ops_.from_quad(term_ratio(t, k));
            if (t.h)
                states_[i].hval = states_[i].hval + ops_.from_rational(h_increment(*t.h, k));
            if (!t.seq.empty()) states_[i].seqval = ops_.from_rational(seqs_(t.seq, k_));
        }
    }

  private:
    struct TermState {
        V hyper, hval, seqval;
        bool direct_next = false;
    };

    void reset_term(size_t i) {
        const Term& t = s_->terms[i];
        QuadValue hy = term_hyper_exact(t, k_);
        states_[i].hyper = ops_.from_quad(hy);
        states_[i].direct_next = hy.is_zero(); // cannot ratio-update away from zero
        if (t.h) {
            long idx = t.h->c * k_ + t.h->d;
            if (idx < 0) throw std::domain_error("negative harmonic index");
            states_[i].hval = ops_.from_rational(harmonic(idx, t.h->m));
        }
        if (!t.seq.empty()) {
            if (!seqs_) throw std::domain_error("sequence reference without resolver");
            states_[i].seqval = ops_.from_rational(seqs_(t.seq, k_));
        }
    }

    const SummandExpr* s_;
    Ops ops_;
    SeqResolver seqs_;
    long k_;
    std::vector<TermState> states_;
};

struct QuadOps {
    using V = QuadValue;
    V from_rational(const Rational& q) const { return QuadValue(q); }
    V from_quad(const QuadValue& q) const { return q; }
};

} // namespace certsum
