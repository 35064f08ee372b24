#pragma once

#include "certsum/exact.hpp"
#include "certsum/primes.hpp"
#include "certsum/rational.hpp"

#include <algorithm>
#include <memory>
#include <mutex>
#include <stdexcept>
#include <string>
#include <vector>

namespace certsum {

// Raised when valuated modular arithmetic runs out of guard digits; the
// caller is expected to retry on the exact rational path.
struct PrecisionExhausted : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shared per-prime state: modulus powers and lazily built residue tables for
// Bernoulli and Euler numbers. Immutable once built; safe to share across
// threads (construction is internally locked).
class PrimeCtx {
  public:
    static constexpr int kGuard = 8;

    PrimeCtx(long p, int e) : p_(p), e_(e) {
        if (e < 1) throw std::invalid_argument("PrimeCtx: exponent must be >= 1");
        if (p < 2 || !is_prime(static_cast<uint64_t>(p)))
            throw std::invalid_argument("PrimeCtx: not a prime");
        pz_ = Int(p);
        pe_ = pow_int(pz_, static_cast<unsigned long>(e_));
        full_ = pow_int(pz_, static_cast<unsigned long>(e_ + kGuard));
    }

    long p() const { return p_; }
    int e() const { return e_; }
    int digits() const { return e_ + kGuard; }
    const Int& pz() const { return pz_; }
    const Int& pe() const { return pe_; }
    const Int& modulus() const { return full_; } // p^(e+guard)

    Int inv_mod(const Int& x) const {
        Int r;
        if (!mpz_invert(r.get_mpz_t(), x.get_mpz_t(), full_.get_mpz_t()))
            throw std::domain_error("PrimeCtx: not invertible");
        return r;
    }

    // Residue of B_n mod p^(e+guard); defined for 0 <= n <= p-3 (no p in any
    // denominator there, by von Staudt-Clausen).
    Int bernoulli_residue(long n) const {
        if (n < 0 || n > p_ - 3 || p_ <= 3)
            throw std::domain_error("bernoulli_mod: index outside safe range");
        std::lock_guard<std::mutex> lock(mu_);
        build_bernoulli();
        return bern_[static_cast<size_t>(n)];
    }

    // Residue of E_n mod p^(e+guard); 0 <= n <= p-1.
    Int euler_residue(long n) const {
        if (n < 0 || n > p_ - 1) throw std::domain_error("euler_mod: index outside range");
        std::lock_guard<std::mutex> lock(mu_);
        build_euler();
        return eul_[static_cast<size_t>(n)];
    }

  private:
    void build_bernoulli() const {
        if (!bern_.empty() || p_ <= 3) return;
        size_t n_max = static_cast<size_t>(p_ - 3);
        bern_.resize(n_max + 1);
        bern_[0] = 1;
        // row[k] = C(n+1, k) mod full
        for (size_t n = 1; n <= n_max; ++n) {
            if (n > 1 && (n & 1)) {
                bern_[n] = 0;
                continue;
            }
            Int acc(0), c(1);
            for (size_t k = 0; k < n; ++k) {
                acc = (acc + c * bern_[k]) % full_;
                // C(n+1,k+1) = C(n+1,k) * (n+1-k) / (k+1); k+1 < p so invertible
                c = c * Int(static_cast<long>(n + 1 - k)) % full_;
                c = c * inv_mod(Int(static_cast<long>(k + 1))) % full_;
            }
            // c == C(n+1, n) == n+1
            Int b = (-acc) % full_;
            if (b < 0) b += full_;
            bern_[n] = b * inv_mod(Int(static_cast<long>(n + 1))) % full_;
        }
    }

    void build_euler() const {
        if (!eul_.empty()) return;
        size_t n_max = static_cast<size_t>(p_ - 1);
        eul_.resize(n_max + 1, Int(0));
        eul_[0] = 1;
        for (size_t n = 2; n <= n_max; n += 2) {
            Int acc(0);
            for (size_t k = 0; k + 2 <= n + 1 && 2 * k < n; ++k) {
                Int c = binomial(Int(static_cast<long>(n)), Int(static_cast<long>(2 * k)));
                acc = (acc + c % full_ * eul_[2 * k]) % full_;
            }
            Int v = (-acc) % full_;
            if (v < 0) v += full_;
            eul_[n] = v;
        }
    }

    long p_;
    int e_;
    Int pz_, pe_, full_;
    mutable std::mutex mu_;
    mutable std::vector<Int> bern_;
    mutable std::vector<Int> eul_;
};

// Valuated residue mod p^e: value = p^v * u with p not dividing u. The unit
// is stored mod p^(e+guard) and `known` tracks how many p-adic digits of it
// are still trustworthy after cancellations. A VBound state means only
// "valuation >= v" is known (all known digits cancelled).
class ModPK {
  public:
    enum class Kind { Zero, Unit, VBound };

    ModPK() : ctx_(nullptr), kind_(Kind::Zero), v_(0), known_(0) {}

    static ModPK zero(const PrimeCtx& ctx) {
        ModPK m;
        m.ctx_ = &ctx;
        return m;
    }

    static ModPK from_integer(const PrimeCtx& ctx, const Int& n) {
        if (n == 0) return zero(ctx);
        Int unit;
        long v = remove_p(n, ctx.pz(), unit);
        return make_unit(ctx, v, unit % ctx.modulus(), ctx.digits());
    }

    static ModPK from_rational(const PrimeCtx& ctx, const Rational& r) {
        if (r == 0) return zero(ctx);
        Int un, ud;
        long vn = remove_p(Int(r.get_num()), ctx.pz(), un);
        long vd = remove_p(Int(r.get_den()), ctx.pz(), ud);
        Int u = un % ctx.modulus() * ctx.inv_mod(ud % ctx.modulus()) % ctx.modulus();
        return make_unit(ctx, vn - vd, u, ctx.digits());
    }

    // Integer residue known only mod p^digits (e.g. a Fermat quotient).
    static ModPK from_residue(const PrimeCtx& ctx, const Int& r, int digits) {
        Int mod = pow_int(ctx.pz(), static_cast<unsigned long>(digits));
        Int x = r % mod;
        if (x < 0) x += mod;
        if (x == 0) return vbound(ctx, digits);
        Int unit;
        long j = remove_p(x, ctx.pz(), unit);
        return make_unit(ctx, j, unit, digits - static_cast<int>(j));
    }

    static ModPK vbound(const PrimeCtx& ctx, long v) {
        ModPK m;
        m.ctx_ = &ctx;
        m.kind_ = Kind::VBound;
        m.v_ = v;
        return m;
    }

    const PrimeCtx& ctx() const { return *ctx_; }
    Kind kind() const { return kind_; }
    bool is_zero() const { return kind_ == Kind::Zero; }
    long valuation() const {
        if (kind_ == Kind::Zero) throw std::domain_error("ModPK: valuation of zero");
        return v_;
    }
    int known() const { return known_; }

    // Unit residue mod p^e, the canonical representative.
    Int canonical_unit() const {
        if (kind_ != Kind::Unit) throw std::domain_error("ModPK: no unit available");
        if (known_ < ctx_->e())
            throw PrecisionExhausted("ModPK: unit known to fewer digits than e");
        return u_ % ctx_->pe();
    }

    ModPK operator-() const {
        if (kind_ != Kind::Unit) return *this;
        ModPK r = *this;
        r.u_ = ctx_->modulus() - r.u_;
        return r;
    }

    ModPK operator*(const ModPK& o) const {
        check_compat(o);
        if (kind_ == Kind::Zero || o.kind_ == Kind::Zero) return zero(*ctx_);
        if (kind_ == Kind::VBound || o.kind_ == Kind::VBound)
            return vbound(*ctx_, v_ + o.v_);
        return make_unit(*ctx_, v_ + o.v_, u_ * o.u_ % ctx_->modulus(),
                         std::min(known_, o.known_));
    }

    ModPK inverse() const {
        if (kind_ == Kind::Zero) throw std::domain_error("ModPK: inverse of zero");
        if (kind_ == Kind::VBound)
            throw PrecisionExhausted("ModPK: inverse of value with unknown unit");
        return make_unit(*ctx_, -v_, ctx_->inv_mod(u_), known_);
    }

    ModPK operator/(const ModPK& o) const { return *this * o.inverse(); }

    ModPK operator+(const ModPK& o) const {
        check_compat(o);
        if (kind_ == Kind::Zero) return o;
        if (o.kind_ == Kind::Zero) return *this;
        if (kind_ == Kind::VBound && o.kind_ == Kind::VBound)
            return vbound(*ctx_, std::min(v_, o.v_));
        if (kind_ == Kind::VBound) return o.add_vbound(v_);
        if (o.kind_ == Kind::VBound) return add_vbound(o.v_);

        long vmin = std::min(v_, o.v_);
        long d1 = v_ - vmin, d2 = o.v_ - vmin;
        long r = std::min({d1 + known_, d2 + o.known_, static_cast<long>(ctx_->digits())});
        if (r <= 0) throw PrecisionExhausted("ModPK: add beyond guard digits");
        Int mod_r = pow_int(ctx_->pz(), static_cast<unsigned long>(r));
        Int raw = (shifted(d1) + o.shifted(d2)) % mod_r;
        if (raw == 0) return vbound(*ctx_, vmin + r);
        Int unit;
        long j = remove_p(raw, ctx_->pz(), unit);
        return make_unit(*ctx_, vmin + j, unit, static_cast<int>(r - j));
    }

    ModPK operator-(const ModPK& o) const { return *this + (-o); }

    ModPK pow(long n) const {
        if (n < 0) return inverse().pow(-n);
        ModPK r = from_integer(*ctx_, Int(1));
        ModPK b = *this;
        while (n) {
            if (n & 1) r = r * b;
            if (n >>= 1) b = b * b;
        }
        return r;
    }

    // Congruence test: v_p(*this - o) >= em.
    bool congruent(const ModPK& o, int em) const {
        ModPK d = *this - o;
        if (d.kind_ == Kind::Zero) return true;
        return d.v_ >= em;
    }

    // Valuation-aligned equality: units agree mod p^m at the smaller valuation.
    // VBound states compare as "indistinguishable at available precision".
    bool equal_mod(const ModPK& o, int m) const {
        check_compat(o);
        if (kind_ == Kind::Zero && o.kind_ == Kind::Zero) return true;
        long vref;
        if (kind_ == Kind::Zero) vref = o.v_;
        else if (o.kind_ == Kind::Zero) vref = v_;
        else vref = std::min(v_, o.v_);
        if (kind_ == Kind::Zero && o.kind_ == Kind::Unit) return false;
        if (o.kind_ == Kind::Zero && kind_ == Kind::Unit) return false;
        ModPK d = *this - o;
        if (d.kind_ == Kind::Zero) return true;
        return d.v_ >= vref + m;
    }

    std::string str() const {
        if (kind_ == Kind::Zero) return "0";
        if (kind_ == Kind::VBound) return "O(p^" + std::to_string(v_) + ")";
        Int u = u_ % pow_int(ctx_->pz(), static_cast<unsigned long>(std::min<long>(known_, ctx_->e())));
        return "p^" + std::to_string(v_) + "*" + u.get_str() +
               (known_ < ctx_->e() ? "(partial)" : "");
    }

  private:
    static ModPK make_unit(const PrimeCtx& ctx, long v, const Int& u, int known) {
        if (known <= 0) throw PrecisionExhausted("ModPK: no trusted digits");
        ModPK m;
        m.ctx_ = &ctx;
        m.kind_ = Kind::Unit;
        m.v_ = v;
        m.u_ = u % ctx.modulus();
        if (m.u_ < 0) m.u_ += ctx.modulus();
        m.known_ = std::min(known, ctx.digits());
        return m;
    }

    // this + (something with valuation >= vb)
    ModPK add_vbound(long vb) const {
        long margin = vb - v_;
        if (margin <= 0) return vbound(*ctx_, vb);
        return make_unit(*ctx_, v_, u_, std::min<long>(known_, margin));
    }

    Int shifted(long d) const { return u_ * pow_int(ctx_->pz(), static_cast<unsigned long>(d)); }

    void check_compat(const ModPK& o) const {
        if (ctx_ == nullptr || o.ctx_ == nullptr)
            throw std::logic_error("ModPK: missing context");
        if (ctx_->p() != o.ctx_->p() || ctx_->e() != o.ctx_->e())
            throw std::logic_error("ModPK: mixed (p, e)");
    }

    const PrimeCtx* ctx_;
    Kind kind_;
    long v_;
    Int u_;
    int known_ = 0;
};

inline ModPK reduce_mod(const Rational& r, const PrimeCtx& ctx) {
    return ModPK::from_rational(ctx, r);
}

inline ModPK bernoulli_mod(long n, const PrimeCtx& ctx) {
    if (n < 0 || n > ctx.p() - 3 || ctx.p() <= 3)
        throw std::domain_error("bernoulli_mod: index outside safe range");
    if (n > 1 && (n & 1)) return ModPK::zero(ctx);
    Int r = ctx.bernoulli_residue(n);
    if (r == 0) return ModPK::zero(ctx); // only n odd > 1, handled above
    return ModPK::from_residue(ctx, r, ctx.digits());
}

inline ModPK euler_mod(long n, const PrimeCtx& ctx) {
    if (n & 1) return ModPK::zero(ctx);
    Int r = ctx.euler_residue(n);
    if (r == 0) return ModPK::zero(ctx);
    return ModPK::from_residue(ctx, r, ctx.digits());
}

// B_n(x) = sum C(n,k) B_k x^(n-k) mod p^e; requires p coprime to den(x), n <= p-2.
inline ModPK bernoulli_poly_mod(long n, const Rational& x, const PrimeCtx& ctx) {
    if (n < 0 || n > ctx.p() - 2) throw std::domain_error("bernoulli_poly_mod: index range");
    if (mpz_divisible_p(x.get_den().get_mpz_t(), ctx.pz().get_mpz_t()))
        throw std::domain_error("bernoulli_poly_mod: p divides den(x)");
    const Int& mod = ctx.modulus();
    Int xr = Int(x.get_num()) % mod * ctx.inv_mod(Int(x.get_den()) % mod) % mod;
    if (xr < 0) xr += mod;
    Int acc(0), xpow(1);
    // accumulate from k = n down so x powers build upward
    for (long k = n; k >= 0; --k) {
        Int bk = (k > 1 && (k & 1)) ? Int(0)
                 : (k == 1 ? mod - ctx.inv_mod(Int(2)) : ctx.bernoulli_residue(k));
        if (k == 0) bk = 1;
        Int c = binomial(Int(n), Int(k)) % mod;
        acc = (acc + c * bk % mod * xpow) % mod;
        xpow = xpow * xr % mod;
    }
    return ModPK::from_residue(ctx, acc, ctx.digits());
}

// E_n(x) = sum C(n,k) (E_k / 2^k) (x - 1/2)^(n-k) mod p^e.
inline ModPK euler_poly_mod(long n, const Rational& x, const PrimeCtx& ctx) {
    if (n < 0 || n > ctx.p() - 1) throw std::domain_error("euler_poly_mod: index range");
    if (mpz_divisible_p(x.get_den().get_mpz_t(), ctx.pz().get_mpz_t()))
        throw std::domain_error("euler_poly_mod: p divides den(x)");
    const Int& mod = ctx.modulus();
    Rational sh = x - Rational(1, 2);
    Int shr = Int(sh.get_num()) % mod * ctx.inv_mod(Int(sh.get_den()) % mod) % mod;
    if (shr < 0) shr += mod;
    Int inv2 = ctx.inv_mod(Int(2));
    Int acc(0), spow(1);
    for (long k = n; k >= 0; --k) {
        Int ek = (k & 1) ? Int(0) : ctx.euler_residue(k);
        Int c = binomial(Int(n), Int(k)) % mod;
        Int term = c * ek % mod;
        Int i2 = 1;
        for (long t = 0; t < k; ++t) i2 = i2 * inv2 % mod;
        acc = (acc + term * i2 % mod * spow) % mod;
        spow = spow * shr % mod;
    }
    return ModPK::from_residue(ctx, acc, ctx.digits());
}

// q_p(a) = (a^(p-1) - 1)/p, computed mod p^e from a^(p-1) mod p^(e+1).
inline ModPK fermat_quotient(const Int& a, const PrimeCtx& ctx) {
    if (mpz_divisible_p(a.get_mpz_t(), ctx.pz().get_mpz_t()))
        throw std::domain_error("fermat_quotient: p divides a");
    Int mod1 = pow_int(ctx.pz(), static_cast<unsigned long>(ctx.digits() + 1));
    Int t;
    Int expo(ctx.p() - 1);
    mpz_powm(t.get_mpz_t(), a.get_mpz_t(), expo.get_mpz_t(), mod1.get_mpz_t());
    Int q = (t - 1) / ctx.pz();
    return ModPK::from_residue(ctx, q, ctx.digits());
}

} // namespace certsum
