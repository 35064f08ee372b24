#pragma once

#include "certsum/modpk.hpp"
#include "certsum/registry.hpp"
#include "certsum/summand.hpp"

#include <chrono>
#include <optional>

namespace certsum {

struct ModOps {
    const PrimeCtx* ctx;
    using V = ModPK;
    V from_rational(const Rational& q) const { return reduce_mod(q, *ctx); }
    V from_quad(const QuadValue& q) const {
        if (!q.is_rational()) throw std::domain_error("irrational value in modular arithmetic");
        return reduce_mod(q.a, *ctx);
    }
};

enum class CongruenceStrategy { ExactRational, ModPKFast, Both };

inline const char* strategy_name(CongruenceStrategy s) {
    switch (s) {
        case CongruenceStrategy::ExactRational: return "exact";
        case CongruenceStrategy::ModPKFast: return "fast";
        default: return "both";
    }
}

inline long upper_index(LimitKind limit, long p) {
    switch (limit) {
        case LimitKind::Half: return (p - 1) / 2;
        case LimitKind::PM1: return p - 1;
        case LimitKind::UpperHalf: return p - 1;
        default: throw std::domain_error("infinite limit in a finite sum");
    }
}

inline long lower_index(LimitKind limit, long start, long p) {
    if (limit == LimitKind::UpperHalf) return (p + 1) / 2;
    return start;
}

// Exact finite sum as a rational, then reduced.
inline ModPK finite_sum_exact(const SummandExpr& s, long lo, long hi, const PrimeCtx& ctx,
                              const SeqResolver& seqs) {
    if (lo > hi) return ModPK::zero(ctx);
    SummandCursor<QuadOps> cur(s, lo, QuadOps{}, seqs);
    QuadValue acc(Rational(0));
    for (long k = lo; k <= hi; ++k) {
        acc = acc + cur.value();
        if (k < hi) cur.advance();
    }
    if (!acc.is_rational()) throw std::domain_error("irrational finite sum");
    return reduce_mod(acc.a, ctx);
}

// Valuated modular path; throws PrecisionExhausted if guard digits run out.
inline ModPK finite_sum_fast(const SummandExpr& s, long lo, long hi, const PrimeCtx& ctx,
                             const SeqResolver& seqs) {
    if (lo > hi) return ModPK::zero(ctx);
    SummandCursor<ModOps> cur(s, lo, ModOps{&ctx}, seqs);
    ModPK acc = ModPK::zero(ctx);
    for (long k = lo; k <= hi; ++k) {
        acc = acc + cur.value();
        if (k < hi) cur.advance();
    }
    return acc;
}

inline ModPK finite_sum_mod(const SummandExpr& s, LimitKind limit, long start, const PrimeCtx& ctx,
                            const SeqResolver& seqs, CongruenceStrategy strategy) {
    long lo = lower_index(limit, start, ctx.p());
    long hi = upper_index(limit, ctx.p());
    if (strategy == CongruenceStrategy::ExactRational)
        return finite_sum_exact(s, lo, hi, ctx, seqs);
    try {
        return finite_sum_fast(s, lo, hi, ctx, seqs);
    } catch (const PrecisionExhausted&) {
        return finite_sum_exact(s, lo, hi, ctx, seqs);
    }
}

// ---- congruence right-hand sides ----

namespace detail_congruence {

inline Rational eval_int_expr(const ExprPtr& e, long p) {
    return RecurrenceSpec::eval_rational_ast(e, {{"p", Rational(p)}});
}

inline Int int_arg(const ExprPtr& e, long p, const char* what) {
    Rational q = eval_int_expr(e, p);
    auto n = as_integer(q);
    if (!n) throw std::domain_error(std::string(what) + ": non-integer argument");
    return *n;
}

inline Rational rat_arg(const ExprPtr& e, long p) { return eval_int_expr(e, p); }

} // namespace detail_congruence

// Atom failure that turns into a "skipped" verdict rather than an error.
struct AtomUndefined : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline ModPK eval_congruence_rhs(const ExprPtr& e, const PrimeCtx& ctx) {
    using Op = Expr::Op;
    using namespace detail_congruence;
    long p = ctx.p();
    auto rec = [&](const ExprPtr& x, auto&& self) -> ModPK {
        switch (x->op) {
            case Op::Num: return reduce_mod(x->num, ctx);
            case Op::Var:
                if (x->name == "p") return ModPK::from_integer(ctx, Int(p));
                throw std::domain_error("free variable in congruence rhs");
            case Op::Neg: return -self(x->args[0], self);
            case Op::Add: return self(x->args[0], self) + self(x->args[1], self);
            case Op::Sub: return self(x->args[0], self) - self(x->args[1], self);
            case Op::Mul: return self(x->args[0], self) * self(x->args[1], self);
            case Op::Div: return self(x->args[0], self) / self(x->args[1], self);
            case Op::Pow: {
                Int n = int_arg(x->args[1], p, "exponent");
                auto nn = to_long(n);
                if (!nn) throw std::domain_error("exponent too large");
                return self(x->args[0], self).pow(*nn);
            }
            case Op::Call: break;
        }
        const std::string& f = x->name;
        if (f == "q") {
            Int a = int_arg(x->args[0], p, "q");
            if (mpz_divisible_p(a.get_mpz_t(), ctx.pz().get_mpz_t()))
                throw AtomUndefined("q_p(a) with p | a");
            return fermat_quotient(a, ctx);
        }
        if (f == "B") {
            auto n = to_long(int_arg(x->args[0], p, "B"));
            if (!n || *n < 0 || *n > p - 3 || p <= 3)
                throw AtomUndefined("Bernoulli index outside safe range");
            return bernoulli_mod(*n, ctx);
        }
        if (f == "E") {
            auto n = to_long(int_arg(x->args[0], p, "E"));
            if (!n || *n < 0 || *n > p - 1) throw AtomUndefined("Euler index outside range");
            return euler_mod(*n, ctx);
        }
        if (f == "Bpoly") {
            auto n = to_long(int_arg(x->args[0], p, "Bpoly"));
            Rational xq = rat_arg(x->args[1], p);
            if (!n) throw AtomUndefined("Bpoly index");
            return bernoulli_poly_mod(*n, xq, ctx);
        }
        if (f == "Epoly") {
            auto n = to_long(int_arg(x->args[0], p, "Epoly"));
            Rational xq = rat_arg(x->args[1], p);
            if (!n) throw AtomUndefined("Epoly index");
            return euler_poly_mod(*n, xq, ctx);
        }
        if (f == "kron") {
            Int a = int_arg(x->args[0], p, "kron");
            Int b = int_arg(x->args[1], p, "kron");
            int s = kronecker_symbol(a, b);
            if (s == 0) throw AtomUndefined("vanishing character");
            return ModPK::from_integer(ctx, Int(s));
        }
        if (f == "H") {
            auto n = to_long(int_arg(x->args[0], p, "H"));
            long m = x->args.size() == 2 ? *to_long(int_arg(x->args[1], p, "H")) : 1;
            if (!n || *n < 0) throw AtomUndefined("harmonic index");
            return reduce_mod(harmonic(*n, static_cast<unsigned>(m)), ctx);
        }
        throw std::domain_error("'" + f + "' is not valid in a congruence rhs");
    };
    return rec(e, rec);
}

// ---- per-prime verdicts ----

struct CongruenceVerdict {
    std::string id;
    std::string sample;
    long prime = 0;
    bool holds = false;
    bool skipped = false;
    std::string skip_reason;
    std::string lhs, rhs;
    CongruenceStrategy strategy = CongruenceStrategy::ExactRational;
    double elapsed_ms = 0;
};

// Default strategy split: exact rationals for small primes, valuated
// arithmetic above, with automatic fallback.
inline CongruenceStrategy default_strategy_for(long p) {
    return p <= 100 ? CongruenceStrategy::ExactRational : CongruenceStrategy::ModPKFast;
}

inline std::vector<CongruenceVerdict> verify_congruence(const ConjectureRecord& rec, long prime_lo,
                                                        long prime_hi, const Registry& reg,
                                                        CongruenceStrategy strategy =
                                                            CongruenceStrategy::ExactRational,
                                                        bool auto_strategy = true) {
    if (rec.kind != RecordKind::Congruence) throw std::domain_error("not a congruence record");
    std::vector<CongruenceVerdict> out;
    SeqResolver seqs = reg.resolver();
    std::vector<std::map<std::string, Rational>> samples = rec.samples;
    if (samples.empty()) samples.push_back({});
    for (auto& sample : samples) {
        ExprPtr rhs_ast = sample.empty() ? rec.rhs_ast : substitute(rec.rhs_ast, sample);
        SummandExpr s = rec.summand_for(sample);
        for (uint32_t p : sieve().primes_in(static_cast<uint32_t>(std::max(2L, prime_lo)),
                                            static_cast<uint32_t>(prime_hi))) {
            if (!rec.filter.admits(p)) continue;
            auto t0 = std::chrono::steady_clock::now();
            CongruenceVerdict v;
            v.id = rec.id;
            v.sample = sample_desc(sample);
            v.prime = p;
            CongruenceStrategy st = auto_strategy ? default_strategy_for(p) : strategy;
            v.strategy = st;
            try {
                PrimeCtx ctx(p, rec.modexp);
                ModPK lhs = finite_sum_mod(s, rec.limit, rec.start, ctx, seqs, st);
                if (rec.lhs_factor_ast) {
                    ModPK fac = eval_congruence_rhs(
                        sample.empty() ? rec.lhs_factor_ast : substitute(rec.lhs_factor_ast, sample),
                        ctx);
                    lhs = lhs * fac;
                }
                ModPK rhs = eval_congruence_rhs(rhs_ast, ctx);
                v.holds = lhs.congruent(rhs, rec.modexp);
                v.lhs = lhs.str();
                v.rhs = rhs.str();
            } catch (const AtomUndefined& e) {
                v.skipped = true;
                v.skip_reason = e.what();
            }
            v.elapsed_ms = std::chrono::duration<double, std::milli>(
                               std::chrono::steady_clock::now() - t0)
                               .count();
            out.push_back(std::move(v));
        }
    }
    return out;
}

// Cross-validation: both strategies must produce identical canonical values.
inline bool strategies_agree(const ConjectureRecord& rec, long prime_lo, long prime_hi,
                             const Registry& reg) {
    SeqResolver seqs = reg.resolver();
    std::vector<std::map<std::string, Rational>> samples = rec.samples;
    if (samples.empty()) samples.push_back({});
    for (auto& sample : samples) {
        SummandExpr s = rec.summand_for(sample);
        for (uint32_t p : sieve().primes_in(static_cast<uint32_t>(std::max(2L, prime_lo)),
                                            static_cast<uint32_t>(prime_hi))) {
            if (!rec.filter.admits(p)) continue;
            PrimeCtx ctx(p, rec.modexp);
            long lo = lower_index(rec.limit, rec.start, p);
            long hi = upper_index(rec.limit, p);
            ModPK a = finite_sum_exact(s, lo, hi, ctx, seqs);
            ModPK b;
            try {
                b = finite_sum_fast(s, lo, hi, ctx, seqs);
            } catch (const PrecisionExhausted&) {
                continue; // fast path declined; nothing to compare
            }
            if (!a.equal_mod(b, rec.modexp)) return false;
        }
    }
    return true;
}

} // namespace certsum
