#pragma once

#include "certsum/ball.hpp"
#include "certsum/constants.hpp"
#include "certsum/registry.hpp"
#include "certsum/summand.hpp"

#include <cmath>
#include <chrono>
#include <deque>
#include <optional>
#include <functional>
#include <optional>

namespace certsum {

struct BallOps {
    mpfr_prec_t prec;
    using V = RealBall;
    V from_rational(const Rational& q) const { return RealBall::from_rational(q, prec); }
    V from_quad(const QuadValue& q) const { return quad_to_ball(q, prec); }
};

enum class SumStatus { Converged, TailCapHit };

struct SeriesEnclosure {
    RealBall value;
    long terms_used = 0;
    double tail_log10 = 0; // log10 of the certified tail bound
    SumStatus status = SumStatus::TailCapHit;
};

// ---------- plain partial sums ----------

inline RealBall partial_sum(const SummandExpr& s, long start, long N, mpfr_prec_t prec,
                            const SeqResolver& seqs = nullptr) {
    SummandCursor<BallOps> cur(s, start, BallOps{prec}, seqs);
    RealBall acc(prec);
    for (long k = start; k <= N; ++k) {
        acc = acc + cur.value();
        if (k < N) cur.advance();
    }
    return acc;
}

// ---------- exact polynomial helpers (for the alternating engine) ----------

namespace detail_series {

using Poly = std::vector<Rational>; // coefficient list, low degree first

inline Rational poly_eval(const Poly& p, const Rational& x) {
    Rational acc(0);
    for (size_t i = p.size(); i-- > 0;) acc = acc * x + p[i];
    return acc;
}

inline Poly poly_add(const Poly& a, const Poly& b) {
    Poly r(std::max(a.size(), b.size()), Rational(0));
    for (size_t i = 0; i < a.size(); ++i) r[i] += a[i];
    for (size_t i = 0; i < b.size(); ++i) r[i] += b[i];
    while (!r.empty() && r.back() == 0) r.pop_back();
    return r;
}

inline Poly poly_scale(Poly a, const Rational& c) {
    for (auto& x : a) x *= c;
    return a;
}

inline Poly poly_mul(const Poly& a, const Poly& b) {
    if (a.empty() || b.empty()) return {};
    Poly r(a.size() + b.size() - 1, Rational(0));
    for (size_t i = 0; i < a.size(); ++i)
        for (size_t j = 0; j < b.size(); ++j) r[i + j] += a[i] * b[j];
    return r;
}

// p(x + c)
inline Poly poly_shift(const Poly& p, const Rational& c) {
    Poly r;
    for (size_t i = p.size(); i-- > 0;) {
        r = poly_add(poly_mul(r, Poly{c, Rational(1)}), Poly{p[i]});
    }
    return r;
}

// difference p(x) - p(x-1)
inline Poly poly_delta(const Poly& p) {
    return poly_add(p, poly_scale(poly_shift(p, Rational(-1)), Rational(-1)));
}

inline long poly_deg(const Poly& p) { return static_cast<long>(p.size()) - 1; }

struct LinFactor {
    Rational alpha, beta; // alpha k + beta
    long mult;
};

// N(k) / prod (alpha_i k + beta_i)^{m_i}  ->  poly part + sum c_{i,t}/(lin_i)^t.
struct PartialFractions {
    Poly poly;
    struct Piece {
        Rational alpha, beta;
        long t;
        Rational c;
    };
    std::vector<Piece> pieces;
};

inline PartialFractions partial_fractions(const Poly& num, const std::vector<LinFactor>& den) {
    // denominator polynomial
    Poly d{Rational(1)};
    long dvars = 0;
    for (auto& f : den) {
        for (long i = 0; i < f.mult; ++i) d = poly_mul(d, Poly{f.beta, f.alpha});
        dvars += f.mult;
    }
    // polynomial division num = q*d + r
    Poly n = num, q;
    long dd = poly_deg(d);
    while (poly_deg(n) >= dd && !n.empty()) {
        long sh = poly_deg(n) - dd;
        Rational c = n.back() / d.back();
        Poly t(sh + 1, Rational(0));
        t[sh] = c;
        if (poly_deg(q) < sh) q.resize(sh + 1, Rational(0));
        q[sh] += c;
        n = poly_add(n, poly_scale(poly_mul(t, d), Rational(-1)));
    }
    PartialFractions out;
    out.poly = q;
    if (dvars == 0) return out;

    // Solve for residues by evaluation at dvars distinct points that avoid roots.
    std::vector<std::pair<size_t, long>> basis; // (factor index, power t)
    for (size_t i = 0; i < den.size(); ++i)
        for (long t = 1; t <= den[i].mult; ++t) basis.push_back({i, t});

    std::vector<std::vector<Rational>> A;
    std::vector<Rational> rhsv;
    Rational x(1000003);
    for (long row = 0; row < dvars; ++row) {
        for (;;) {
            bool bad = false;
            for (auto& f : den)
                if (f.alpha * x + f.beta == 0) bad = true;
            if (!bad) break;
            x += 1;
        }
        std::vector<Rational> arow;
        for (auto& [fi, t] : basis)
            arow.push_back(pow_rational(den[fi].alpha * x + den[fi].beta, -t));
        A.push_back(arow);
        rhsv.push_back(poly_eval(n, x) / poly_eval(d, x));
        x += 1;
    }
    // Gaussian elimination (exact)
    long m = dvars;
    for (long col = 0; col < m; ++col) {
        long piv = -1;
        for (long r = col; r < m; ++r)
            if (A[r][col] != 0) {
                piv = r;
                break;
            }
        if (piv < 0) throw std::logic_error("partial fractions: singular system");
        std::swap(A[col], A[piv]);
        std::swap(rhsv[col], rhsv[piv]);
        for (long r = 0; r < m; ++r) {
            if (r == col || A[r][col] == 0) continue;
            Rational f = A[r][col] / A[col][col];
            for (long c2 = col; c2 < m; ++c2) A[r][c2] -= f * A[col][c2];
            rhsv[r] -= f * rhsv[col];
        }
    }
    for (long i = 0; i < m; ++i) {
        Rational c = rhsv[i] / A[i][i];
        if (c == 0) continue;
        const LinFactor& f = den[basis[static_cast<size_t>(i)].first];
        out.pieces.push_back({f.alpha, f.beta, basis[static_cast<size_t>(i)].second, c});
    }
    return out;
}

} // namespace detail_series

// ---------- alternating boundary engine ----------
//
// Applies to alternating series whose absolute term is
//     |coef| * R(k) * M_k,   M_k = prod over central binomials of
//         (C(2gk,gk)/4^{gk})^{e}        for e > 0
//         (4^{gk}/((2gk+1) C(2gk,gk)))^{e}  for e < 0  [the (2gk+1) moves to R]
//     times sigma^k with sigma = |base| * 4^{sum g e} <= 1.
// Every factor of M is a Hausdorff moment sequence, so M is totally monotone
// and alternating tails can be summed by the Euler transform with the
// remainder bounded by 2^-J times the first term. Harmonic weights and
// polynomial factors are peeled off by summation by parts, which only
// requires iterated alternating-tail transforms of M.
class AltTauEngine {
  public:
    AltTauEngine(mpfr_prec_t prec, int digits) : digits_(digits) {
        J_ = static_cast<long>(digits * 10 / 3) + 24;
        prec_ = prec + 4 * (static_cast<mpfr_prec_t>(std::log2(double(J_))) + 2) + 64;
    }

    struct Shape {
        Rational sign_coef;   // signed rational coefficient (surds not supported here)
        detail_series::Poly num;
        std::vector<detail_series::LinFactor> den;
        Rational sigma;       // 0 < sigma <= 1
        std::vector<std::pair<long, long>> pos; // (g, e) central binomials, e > 0
        std::vector<std::pair<long, long>> neg; // (g, |e|) inverted central binomials
        std::optional<HFactor> h;
    };

    // Structural check; returns nullopt when the term is outside the class.
    static std::optional<Shape> classify(const Term& t) {
        if (!t.coef.is_rational() || !t.base.is_rational()) return std::nullopt;
        if (!t.seq.empty()) return std::nullopt;
        if (t.base.a >= 0) return std::nullopt; // engine is for alternating series
        Shape s;
        s.sign_coef = t.coef.a;
        s.h = t.h;
        s.num = {Rational(1)};
        Rational scale = -t.base.a; // |base|
        for (auto& b : t.binoms) {
            if (b.a0 != 0 || b.b0 != 0 || b.a != 2 * b.b || b.b <= 0) return std::nullopt;
            long g = b.b;
            if (b.exp > 0) {
                s.pos.push_back({g, b.exp});
                scale *= pow_rational(Rational(pow_int(Int(4), g)), b.exp);
            } else {
                // 1/C(2gk,gk) = (2gk+1) * 4^{-gk} * [4^{gk} B(gk+1,gk+1)]
                s.neg.push_back({g, -b.exp});
                scale *= pow_rational(Rational(pow_int(Int(4), g)), b.exp);
                for (long i = 0; i < -b.exp; ++i)
                    s.num = detail_series::poly_mul(s.num, {Rational(1), Rational(2 * g)});
            }
        }
        if (scale > 1) return std::nullopt;
        s.sigma = scale;
        if (t.kpow > 0) {
            detail_series::Poly k1{Rational(0), Rational(1)};
            for (long i = 0; i < t.kpow; ++i) s.num = detail_series::poly_mul(s.num, k1);
        } else if (t.kpow < 0) {
            s.den.push_back({Rational(1), Rational(0), -t.kpow});
        }
        for (auto& l : t.linfactors) {
            if (l.exp > 0) {
                for (long i = 0; i < l.exp; ++i)
                    s.num = detail_series::poly_mul(s.num, {Rational(l.d), Rational(l.c)});
            } else {
                s.den.push_back({Rational(l.c), Rational(l.d), -l.exp});
            }
        }
        return s;
    }

    // M_k exact value (positive).
    static Rational moment_value(const Shape& s, long k) {
        Rational v = pow_rational(s.sigma, k);
        for (auto& [g, e] : s.pos) {
            Rational c(binomial(2 * g * k, g * k), pow_int(Int(4), g * k));
            c.canonicalize();
            v *= pow_rational(c, e);
        }
        for (auto& [g, e] : s.neg) {
            Rational c(pow_int(Int(4), g * k), Int(2 * g * k + 1) * binomial(2 * g * k, g * k));
            c.canonicalize();
            v *= pow_rational(c, e);
        }
        return v;
    }

    // Sum_{k >= start} (-1)^k * sign_coef * R(k) * M_k * [H factor], as a ball.
    RealBall sum_term(const Shape& s, long start) {
        // table of exact moment values over the range all transforms can need
        long depth = poly_degree_budget(s) + (s.h ? 2 : 1) + 1;
        long K = depth * (J_ + 4) + J_ + 16;
        std::vector<Rational> mvals(K + 1);
        for (long i = 0; i <= K; ++i) mvals[i] = moment_value(s, start + i);
        Seq base{start, {}};
        base.vals.reserve(mvals.size());
        for (auto& q : mvals) base.vals.push_back(RealBall::from_rational(q, prec_));

        using namespace detail_series;
        RealBall total(prec_);
        if (!s.h) {
            total = sum_ratfn(s.num, s.den, base, start);
        } else {
            total = sum_with_h(s, base, start);
        }
        return total.mul_rational(s.sign_coef);
    }

  private:
    struct Seq {
        long k0;
        std::vector<RealBall> vals; // vals[i] = S_{k0+i}, totally monotone, >= 0
        const RealBall& at(long k) const { return vals.at(static_cast<size_t>(k - k0)); }
        long last() const { return k0 + static_cast<long>(vals.size()) - 1; }
    };

    static long poly_degree_budget(const Shape& s) {
        long d = poly_deg(s.num);
        return d < 0 ? 0 : d;
    }
    static long poly_deg(const detail_series::Poly& p) {
        return static_cast<long>(p.size()) - 1;
    }

    // Alternating tail transform: out_k = sum_{j>=k} (-1)^{j-k} S_j via the
    // Euler transform. Output range shrinks by J_.
    Seq tau(const Seq& in) const {
        long n = static_cast<long>(in.vals.size());
        long out_n = n - J_ - 1;
        if (out_n <= 0) throw std::logic_error("tau: value table too short");
        // forward difference triangle with alternating signs:
        // d0 = S, d_{j} = d_{j-1}[i] - d_{j-1}[i+1] (each row stays >= 0 for TM input)
        std::vector<RealBall> row(in.vals.begin(), in.vals.end());
        Seq out{in.k0, std::vector<RealBall>()};
        out.vals.assign(static_cast<size_t>(out_n), RealBall(prec_));
        std::vector<RealBall> acc(static_cast<size_t>(out_n), RealBall(prec_));
        Rational w(1, 2);
        for (long j = 0; j <= J_; ++j) {
            for (long i = 0; i < out_n; ++i)
                acc[static_cast<size_t>(i)] =
                    acc[static_cast<size_t>(i)] + row[static_cast<size_t>(i)].mul_rational(w);
            w /= 2;
            if (j < J_) {
                for (long i = 0; i + j + 1 < n; ++i)
                    row[static_cast<size_t>(i)] =
                        row[static_cast<size_t>(i)] - row[static_cast<size_t>(i + 1)];
            }
        }
        // remainder <= 2^-(J+1) * S_k for each output k
        for (long i = 0; i < out_n; ++i) {
            RealBall err = in.vals[static_cast<size_t>(i)].abs_ub();
            err = err.mul_rational(pow_rational(Rational(1, 2), J_ + 1));
            acc[static_cast<size_t>(i)].add_error(err);
            out.vals[static_cast<size_t>(i)] = acc[static_cast<size_t>(i)];
        }
        return out;
    }

    // drop table entries below new_k0
    static Seq slice(const Seq& in, long new_k0) {
        if (new_k0 <= in.k0) return in;
        long drop = new_k0 - in.k0;
        if (drop >= static_cast<long>(in.vals.size()))
            throw std::logic_error("slice: value table too short");
        Seq out{new_k0, {}};
        out.vals.assign(in.vals.begin() + drop, in.vals.end());
        return out;
    }

    // pointwise merge S_k / (alpha k + beta)^t; stays totally monotone when
    // alpha k + beta > 0 on the range
    Seq merge_lin(const Seq& in, const Rational& alpha, const Rational& beta, long t) const {
        Seq out{in.k0, {}};
        out.vals.reserve(in.vals.size());
        for (long i = 0; i < static_cast<long>(in.vals.size()); ++i) {
            Rational lv = alpha * Rational(in.k0 + i) + beta;
            if (lv <= 0) throw std::logic_error("merge_lin: factor not positive on range");
            out.vals.push_back(in.vals[static_cast<size_t>(i)].mul_rational(pow_rational(lv, -t)));
        }
        return out;
    }

    // Sum_{k >= start} (-1)^k N(k)/prod(lin)^(mult) * S_k  (S totally monotone).
    //
    // Polynomial part by summation by parts, one degree per level:
    //   sum_{j>=k}(-1)^j Q(j) S_j = (-1)^k Q(k) tau(S)_k
    //                             + sum_{j>=k+1}(-1)^j (Q(j)-Q(j-1)) tau(S)_j
    // Partial-fraction parts fold 1/(lin)^t into the sequence (still totally
    // monotone) and reduce to a single tau value.
    RealBall sum_ratfn(const detail_series::Poly& num,
                       const std::vector<detail_series::LinFactor>& den, const Seq& S_in,
                       long start) {
        using namespace detail_series;
        Seq S = slice(S_in, start);
        PartialFractions pf = partial_fractions(num, den);
        RealBall total(prec_);
        Poly q = pf.poly;
        Seq level_seq = S;
        long kk = start;
        while (!q.empty()) {
            level_seq = tau(level_seq);
            RealBall c = level_seq.at(kk).mul_rational(poly_eval(q, Rational(kk)));
            if (kk & 1) c = -c;
            total = total + c;
            q = poly_delta(q);
            ++kk;
        }
        for (auto& piece : pf.pieces) {
            Seq merged = merge_lin(S, piece.alpha, piece.beta, piece.t);
            Seq t1 = tau(merged);
            RealBall c = t1.at(start).mul_rational(piece.c);
            if (start & 1) c = -c;
            total = total + c;
        }
        return total;
    }

    RealBall sum_with_h(const Shape& s, const Seq& S, long start) {
        using namespace detail_series;
        const HFactor& h = *s.h;
        // boundary: h(start) * V_start with V_k = sum_{j>=k}(-1)^j R(j) S_j
        long idx0 = h.c * start + h.d;
        if (idx0 < 0) throw std::domain_error("negative harmonic index");
        RealBall total = sum_ratfn(s.num, s.den, S, start).mul_rational(harmonic(idx0, h.m));

        // remaining: sum_{k>start} delta_k V_k, with
        // V_k = sum_l (-1)^{k+l-1} Q_l(k+l-1) (tau^l S')_{k+l-1} summed over
        // partial-fraction components; regroup as new alternating series.
        PartialFractions pf = partial_fractions(s.num, s.den);

        // delta_k as an exact rational function: numerator/denominator polys
        // delta_k = sum_{i=1..c} 1/(c k + d - c + i)^m
        std::vector<LinFactor> dden;
        for (long i = 1; i <= h.c; ++i)
            dden.push_back({Rational(h.c), Rational(h.d - h.c + i), h.m});
        Poly dnum; // sum over i of prod_{i' != i} (lin_{i'})^m
        {
            for (long i = 1; i <= h.c; ++i) {
                Poly p{Rational(1)};
                for (long i2 = 1; i2 <= h.c; ++i2) {
                    if (i2 == i) continue;
                    Poly lin{Rational(h.d - h.c + i2), Rational(h.c)};
                    for (int t = 0; t < h.m; ++t) p = poly_mul(p, lin);
                }
                dnum = poly_add(dnum, p);
            }
        }

        // polynomial components of V: level l uses Q_l, tau^l; Q_{l+1} = Q_l(x) - Q_l(x-1)
        struct Comp {
            Poly q;
            long level;
        };
        std::vector<Comp> comps;
        {
            Poly q = pf.poly;
            long level = 1;
            while (!q.empty()) {
                comps.push_back({q, level});
                q = poly_delta(q);
                ++level;
            }
        }
        // tau towers over S
        std::vector<Seq> taus; // taus[l-1] = tau^l S
        {
            Seq cur = S;
            long maxlevel = 1;
            for (auto& c : comps) maxlevel = std::max(maxlevel, c.level);
            for (long l = 1; l <= maxlevel + 1; ++l) {
                cur = tau(cur);
                taus.push_back(cur);
            }
        }

        // for each component: series sum_{n >= start+l} (-1)^n [delta_{n-l+1} Q_l(n)] tau^l S_n
        for (auto& comp : comps) {
            long l = comp.level;
            // rational function in n: delta shifted by (l-1): lin factors (c n + d-c+i - c(l-1))
            std::vector<LinFactor> dden_n;
            for (long i = 1; i <= h.c; ++i)
                dden_n.push_back({Rational(h.c), Rational(h.d - h.c + i - h.c * (l - 1)), h.m});
            Poly dnum_n = poly_shift_num(dnum, dden, Rational(-(l - 1)));
            Poly full_num = poly_mul(dnum_n, comp.q);
            total = total + sum_ratfn_on(full_num, dden_n, taus[static_cast<size_t>(l - 1)],
                                         start + l);
        }
        // partial-fraction components of V: level 1 with merged sequences
        for (auto& piece : pf.pieces) {
            Seq merged = merge_lin(S, piece.alpha, piece.beta, piece.t);
            Seq t1 = tau(merged);
            // V-component at k: (-1)^k c * t1_k; outer series:
            // sum_{k>start}(-1)^k delta_k c t1_k
            Poly cnum = poly_scale(dnum, piece.c);
            total = total + sum_ratfn_on(cnum, dden, t1, start + 1);
        }
        return total;
    }

    // helper used by sum_with_h: same contract as sum_ratfn but with a
    // caller-supplied (already transformed) sequence table.
    RealBall sum_ratfn_on(const detail_series::Poly& num,
                          const std::vector<detail_series::LinFactor>& den, const Seq& S,
                          long start) {
        return sum_ratfn(num, den, S, start);
    }

    // numerator of delta after substituting n -> n + shift in its defining
    // product form (dden describes the original factors)
    detail_series::Poly poly_shift_num(const detail_series::Poly& dnum,
                                       const std::vector<detail_series::LinFactor>& dden,
                                       const Rational& shift) const {
        (void)dden;
        return detail_series::poly_shift(dnum, shift);
    }

    mpfr_prec_t prec_;
    int digits_;
    long J_;
};

// ---------- adaptive summation ----------

struct SumOptions {
    long n_max = 1000000;
    int ratio_window = 20;
    double ratio_safety = 1.05;
    double ratio_cutoff = 0.95;
};

// Limit ratio of |term(k+1)/term(k)| as k -> infinity (coarse, double).
inline double asymptotic_ratio(const Term& t) {
    double r = 1.0;
    QuadValue b = t.base;
    double bv = std::abs(b.a.get_d() + b.b.get_d() * std::sqrt(double(b.d)));
    r *= bv;
    for (auto& bf : t.binoms) {
        double a = double(bf.a), bb = double(bf.b), c = a - bb;
        double lim = std::pow(a, a) / (std::pow(bb, bb) * std::pow(c, c));
        r *= std::pow(lim, double(bf.exp));
    }
    return r;
}

inline double asymptotic_ratio(const SummandExpr& s) {
    double worst = 0;
    for (auto& t : s.terms) worst = std::max(worst, asymptotic_ratio(t));
    return worst;
}

inline bool alternating_engine_applies(const SummandExpr& s) {
    for (auto& t : s.terms)
        if (!AltTauEngine::classify(t)) return false;
    return !s.terms.empty();
}

// Geometric-tail summation. Each term's future ratios are bounded by its
// structural supremum over [N, inf) (exact, from factor monotonicity); the
// tail is the per-term geometric bound. Recurrence-sequence terms have no
// structural bound and fall back to the observed-ratio window (max window
// ratio times the safety factor, required below the cutoff).
inline SeriesEnclosure sum_window(const SummandExpr& s, long start, int digits,
                                  mpfr_prec_t prec, const SeqResolver& seqs,
                                  const SumOptions& opt) {
    SummandCursor<BallOps> cur(s, start, BallOps{prec}, seqs);
    RealBall acc(prec);
    std::deque<double> window;
    RealBall prev_abs_lb(prec);
    bool have_prev = false;
    bool any_seq = s.has_seq();

    mpfr_t tol;
    mpfr_init2(tol, 64);
    mpfr_set_ui(tol, 10, MPFR_RNDN);
    mpfr_pow_si(tol, tol, -(digits + 4), MPFR_RNDD);

    SeriesEnclosure out;
    for (long k = start;; ++k) {
        RealBall t = cur.value();
        acc = acc + t;
        if (any_seq) {
            RealBall albr = t.abs_lb(), aubr = t.abs_ub();
            if (have_prev && mpfr_sgn(prev_abs_lb.mid()) > 0) {
                mpfr_t q;
                mpfr_init2(q, 64);
                mpfr_div(q, aubr.mid(), prev_abs_lb.mid(), MPFR_RNDU);
                window.push_back(mpfr_get_d(q, MPFR_RNDU));
                mpfr_clear(q);
                if (static_cast<int>(window.size()) > opt.ratio_window) window.pop_front();
            } else if (have_prev) {
                window.clear();
            }
            prev_abs_lb = albr;
            have_prev = true;
        }

        bool try_stop = k >= start + 2 && ((k & 3) == 0 || k < start + 24);
        if (try_stop) {
            double window_rho = -1;
            if (any_seq && static_cast<int>(window.size()) == opt.ratio_window) {
                window_rho = 0;
                for (double r : window) window_rho = std::max(window_rho, r);
                window_rho *= opt.ratio_safety;
            }
            mpfr_t tail, piece;
            mpfr_init2(tail, 64);
            mpfr_init2(piece, 64);
            mpfr_set_zero(tail, 1);
            bool certifiable = true;
            for (size_t i = 0; i < cur.term_count() && certifiable; ++i) {
                double rho;
                auto sup = structural_ratio_sup(s.terms[i], k);
                if (sup) {
                    rho = mpfr_get_d(
                        RealBall::from_rational(*sup, 64).upper().mid(), MPFR_RNDU);
                } else if (window_rho >= 0) {
                    rho = window_rho;
                } else {
                    certifiable = false;
                    break;
                }
                if (!(rho < opt.ratio_cutoff)) {
                    certifiable = false;
                    break;
                }
                RealBall ub = cur.term_value(i).abs_ub();
                mpfr_mul_d(piece, ub.mid(), rho / (1.0 - rho), MPFR_RNDU);
                mpfr_add(tail, tail, piece, MPFR_RNDU);
            }
            if (certifiable && mpfr_cmp(tail, tol) < 0) {
                mpfr_t tmp;
                mpfr_init2(tmp, 64);
                mpfr_set(tmp, tail, MPFR_RNDU);
                RealBall err = RealBall::from_endpoints(tmp, tmp, 64);
                mpfr_clear(tmp);
                acc.add_error(err);
                out.value = acc;
                out.terms_used = k - start + 1;
                out.tail_log10 = std::log10(std::max(mpfr_get_d(tail, MPFR_RNDU), 1e-300));
                out.status = SumStatus::Converged;
                mpfr_clears(tail, piece, tol, nullptr);
                return out;
            }
            mpfr_clears(tail, piece, nullptr);
        }
        if (k - start + 1 >= opt.n_max) {
            out.value = acc;
            out.terms_used = k - start + 1;
            out.status = SumStatus::TailCapHit;
            mpfr_clear(tol);
            return out;
        }
        cur.advance();
    }
}

inline SeriesEnclosure sum_to_tolerance(const SummandExpr& s, long start, int digits,
                                        const SeqResolver& seqs = nullptr,
                                        const SumOptions& opt = {}) {
    mpfr_prec_t prec = prec_for_digits(digits);
    double ratio = asymptotic_ratio(s);
    if (ratio < opt.ratio_cutoff / opt.ratio_safety)
        return sum_window(s, start, digits, prec, seqs, opt);
    if (ratio <= 1.0 + 1e-9 && alternating_engine_applies(s)) {
        AltTauEngine eng(prec, digits + 4);
        RealBall acc(prec);
        long terms = 0;
        for (auto& t : s.terms) {
            auto shape = AltTauEngine::classify(t);
            acc = acc + eng.sum_term(*shape, start);
            ++terms;
        }
        SeriesEnclosure out;
        out.value = acc;
        out.terms_used = terms; // transform components, not raw terms
        out.tail_log10 = acc.rad_log10();
        out.status = SumStatus::Converged;
        return out;
    }
    // No sound tail bound available.
    SeriesEnclosure out;
    out.value = RealBall(prec);
    out.status = SumStatus::TailCapHit;
    return out;
}

// ---------- closed forms ----------

using SeriesFn = std::function<RealBall(const ExprPtr& summand, long start, int digits)>;

inline RealBall eval_closed_form(const ExprPtr& e, int digits, mpfr_prec_t prec,
                                 const SeriesFn& series_fn) {
    using Op = Expr::Op;
    auto rec = [&](const ExprPtr& x, auto&& self) -> RealBall {
        switch (x->op) {
            case Op::Num: return RealBall::from_rational(x->num, prec);
            case Op::Var: throw std::domain_error("free variable '" + x->name + "' in closed form");
            case Op::Neg: return -self(x->args[0], self);
            case Op::Add: return self(x->args[0], self) + self(x->args[1], self);
            case Op::Sub: return self(x->args[0], self) - self(x->args[1], self);
            case Op::Mul: return self(x->args[0], self) * self(x->args[1], self);
            case Op::Div: return self(x->args[0], self) / self(x->args[1], self);
            case Op::Pow: {
                ExprPtr ex = fold_constants(x->args[1]);
                if (ex->op != Op::Num) throw std::domain_error("non-constant exponent");
                auto n = as_integer(ex->num);
                if (n && to_long(*n)) return self(x->args[0], self).pow_si(*to_long(*n));
                // rational exponent a/b -> rootn then power
                Rational q = ex->num;
                long den = *to_long(Int(q.get_den()));
                long nm = *to_long(Int(q.get_num()));
                return self(x->args[0], self).rootn(static_cast<unsigned long>(den)).pow_si(nm);
            }
            case Op::Call: break;
        }
        const std::string& f = x->name;
        auto rat_arg = [&](size_t i) -> Rational {
            ExprPtr a = fold_constants(x->args[i]);
            if (a->op != Op::Num) throw std::domain_error(f + ": expected rational argument");
            return a->num;
        };
        auto int_arg = [&](size_t i) -> long {
            Rational q = rat_arg(i);
            auto n = as_integer(q);
            if (!n || !to_long(*n)) throw std::domain_error(f + ": expected integer argument");
            return *to_long(*n);
        };
        if (f == "pi") return constant(ConstantKey::pi(), prec);
        if (f == "G") return constant(ConstantKey::catalan(), prec);
        if (f == "K") return constant(ConstantKey::k3(), prec);
        if (f == "L") return constant(ConstantKey::l8(), prec);
        if (f == "phi") return constant(ConstantKey::phi(), prec);
        if (f == "zeta") return constant(ConstantKey::zeta(int_arg(0)), prec);
        if (f == "beta") return constant(ConstantKey::beta(int_arg(0)), prec);
        if (f == "Gamma") return constant(ConstantKey::gamma_rat(rat_arg(0)), prec);
        if (f == "sqrt") {
            ExprPtr a = fold_constants(x->args[0]);
            if (a->op == Op::Num) return constant(ConstantKey::sqrt_q(a->num), prec);
            return self(a, self).sqrt();
        }
        if (f == "log") {
            ExprPtr a = fold_constants(x->args[0]);
            if (a->op == Op::Num) return constant(ConstantKey::log_q(a->num), prec);
            return self(a, self).log();
        }
        if (f == "root") {
            long n = int_arg(1);
            if (n < 2) throw std::domain_error("root: index must be >= 2");
            return self(x->args[0], self).rootn(static_cast<unsigned long>(n));
        }
        if (f == "series") {
            if (!series_fn) throw std::domain_error("embedded series not available here");
            return series_fn(x->args[1], int_arg(0), digits);
        }
        throw std::domain_error("'" + f + "' is not valid in a closed form");
    };
    return rec(e, rec);
}

// ---------- identity verdicts ----------

struct IdentityVerdict {
    std::string id;
    std::string sample;
    Verdict verdict = Verdict::Inconclusive;
    int digits = 0;
    SumStatus status = SumStatus::Converged;
    std::string lhs, rhs;
    double bound_log10 = 0; // certified |lhs - rhs| upper bound
    long terms = 0;
    double elapsed_ms = 0;
};

// Evaluate one identity record (all samples) at the requested digit target.
// On Inconclusive the precision is doubled up to `restarts` times.
inline std::vector<IdentityVerdict> verify_identity(const ConjectureRecord& rec, int digits,
                                                    const Registry& reg, int restarts = 3,
                                                    const SumOptions& opt = {}) {
    if (rec.kind != RecordKind::Identity) throw std::domain_error("not an identity record");
    std::vector<IdentityVerdict> out;
    SeqResolver seqs = reg.resolver();
    std::vector<std::map<std::string, Rational>> samples = rec.samples;
    if (samples.empty()) samples.push_back({});
    for (auto& sample : samples) {
        auto t0 = std::chrono::steady_clock::now();
        IdentityVerdict v;
        v.id = rec.id;
        v.sample = sample_desc(sample);
        v.digits = digits;
        int extra = 0;
        for (int attempt = 0; attempt <= restarts; ++attempt) {
            int d2 = digits + extra;
            SummandExpr s = rec.summand_for(sample);
            SeriesEnclosure lhs = sum_to_tolerance(s, rec.start, d2, seqs, opt);
            mpfr_prec_t prec = prec_for_digits(d2);
            SeriesFn series_fn = [&](const ExprPtr& inner, long istart, int idigits) {
                SummandExpr si = normalize_summand(sample.empty() ? inner : substitute(inner, sample));
                SeriesEnclosure e = sum_to_tolerance(si, istart, idigits + 4, seqs, opt);
                if (e.status != SumStatus::Converged)
                    throw std::domain_error("embedded series did not converge");
                return e.value;
            };
            ExprPtr rhs_ast = sample.empty() ? rec.rhs_ast : substitute(rec.rhs_ast, sample);
            RealBall rhs = eval_closed_form(fold_constants(rhs_ast), d2, prec, series_fn);
            v.status = lhs.status;
            v.terms = lhs.terms_used;
            v.lhs = lhs.value.str(digits + 8);
            v.rhs = rhs.str(digits + 8);
            if (lhs.status != SumStatus::Converged) {
                v.verdict = Verdict::Inconclusive;
                break;
            }
            v.verdict = ball_compare(lhs.value, rhs, digits);
            v.bound_log10 = difference_bound_log10(lhs.value, rhs);
            if (v.verdict != Verdict::Inconclusive) break;
            extra = extra == 0 ? digits : extra * 2;
        }
        v.elapsed_ms = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - t0)
                           .count();
        out.push_back(std::move(v));
    }
    return out;
}

} // namespace certsum
