#pragma once

#include "certsum/ball.hpp"
#include "certsum/exact.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <string>
#include <utility>

namespace certsum {

// Named constants appearing on closed-form sides. The key doubles as the
// cache key, so the string form must be canonical.
struct ConstantKey {
    enum class Tag { Pi, Catalan, Zeta, Beta, K3, L8, LogQ, SqrtQ, GammaRat, GoldenPhi };
    Tag tag;
    long n = 0;       // zeta/beta order
    Rational q = 0;   // log/sqrt/gamma argument

    static ConstantKey pi() { return {Tag::Pi}; }
    static ConstantKey catalan() { return {Tag::Catalan}; }
    static ConstantKey zeta(long n) {
        if (n < 2) throw std::domain_error("zeta: order must be >= 2");
        return {Tag::Zeta, n};
    }
    static ConstantKey beta(long n) {
        if (n < 1) throw std::domain_error("beta: order must be >= 1");
        return {Tag::Beta, n};
    }
    static ConstantKey k3() { return {Tag::K3}; }
    static ConstantKey l8() { return {Tag::L8}; }
    static ConstantKey log_q(const Rational& q) {
        if (q <= 0) throw std::domain_error("log: argument must be positive");
        return {Tag::LogQ, 0, q};
    }
    static ConstantKey sqrt_q(const Rational& q) {
        if (q < 0) throw std::domain_error("sqrt: negative argument");
        return {Tag::SqrtQ, 0, q};
    }
    static ConstantKey gamma_rat(const Rational& x) {
        if (x <= 0 || x >= 1) throw std::domain_error("gamma: argument must be in (0,1)");
        return {Tag::GammaRat, 0, x};
    }
    static ConstantKey phi() { return {Tag::GoldenPhi}; }

    std::string str() const {
        switch (tag) {
            case Tag::Pi: return "pi";
            case Tag::Catalan: return "catalan";
            case Tag::Zeta: return "zeta(" + std::to_string(n) + ")";
            case Tag::Beta: return "beta(" + std::to_string(n) + ")";
            case Tag::K3: return "K";
            case Tag::L8: return "L";
            case Tag::LogQ: return "log(" + q.get_str() + ")";
            case Tag::SqrtQ: return "sqrt(" + q.get_str() + ")";
            case Tag::GammaRat: return "gamma(" + q.get_str() + ")";
            case Tag::GoldenPhi: return "phi";
        }
        return "?";
    }

    bool operator<(const ConstantKey& o) const { return str() < o.str(); }
};

namespace detail {

// Hurwitz zeta(s, a) for integer s >= 2, rational a in (0, 1], by
// Euler-Maclaurin with the remainder bounded by the first omitted term
// (valid for real s > 0); a factor 2 is kept on top.
inline RealBall hurwitz_zeta(long s, const Rational& a, mpfr_prec_t wp) {
    long nm = static_cast<long>(wp * 17 / 100) + 12;
    long N = nm, M = nm;

    RealBall sum(wp);
    for (long i = 0; i < N; ++i) {
        Rational base = Rational(i) + a;
        sum = sum + RealBall::from_rational(base, wp).pow_si(-s);
    }
    Rational na = Rational(N) + a;
    RealBall u = RealBall::from_rational(na, wp).reciprocal(); // 1/(N+a)

    // (N+a)^(1-s)/(s-1) + (N+a)^(-s)/2
    RealBall us = u.pow_si(s - 1);
    sum = sum + us.mul_rational(Rational(1, s - 1));
    RealBall upow = us * u; // (N+a)^(-s)
    sum = sum + upow.mul_rational(Rational(1, 2));

    // sum_j B_2j/(2j)! * (s)_(2j-1) * (N+a)^(-s-2j+1)
    RealBall u2 = u * u;
    Int fact(2);  // (2j)!
    Int risej(s); // rising factorial (s)_(2j-1) = s(s+1)...(s+2j-2)
    RealBall upj = upow * u; // (N+a)^(-s-2j+1) at j = 1
    long j = 1;
    for (;; ++j) {
        Rational coef = bernoulli_exact(static_cast<unsigned>(2 * j)) / Rational(fact);
        RealBall term = upj.mul_rational(coef * Rational(risej));
        // next omitted term bound happens after loop exit; add current
        sum = sum + term;
        // prepare j+1
        Int next_rise = risej * Int(s + 2 * j - 1) * Int(s + 2 * j);
        Int next_fact = fact * Int(2 * j + 1) * Int(2 * j + 2);
        RealBall next_upj = upj * u2;
        Rational next_coef = bernoulli_exact(static_cast<unsigned>(2 * j + 2)) / Rational(next_fact);
        RealBall next_term_mag = next_upj.mul_rational(next_coef * Rational(next_rise)).abs_ub();
        if (j >= M) {
            RealBall err = next_term_mag.mul_rational(Rational(2));
            sum.add_error(err);
            break;
        }
        risej = next_rise;
        fact = next_fact;
        upj = next_upj;
    }
    return sum;
}

// log Gamma(z) for rational z >= 2, Stirling series with the remainder
// bounded by the first omitted term (real positive argument).
inline RealBall log_gamma_stirling(const Rational& z, mpfr_prec_t wp) {
    RealBall zb = RealBall::from_rational(z, wp);
    RealBall lnz = zb.log();
    RealBall two_pi = RealBall::pi(wp).mul_rational(Rational(2));
    RealBall acc = (zb - RealBall::from_rational(Rational(1, 2), wp)) * lnz - zb +
                   two_pi.log().mul_rational(Rational(1, 2));
    RealBall invz = zb.reciprocal();
    RealBall invz2 = invz * invz;
    RealBall zpow = invz; // z^(-(2j-1)), j = 1
    long max_j = static_cast<long>(mpfr_get_d(zb.mid(), MPFR_RNDN) * 3.14) + 2;
    for (long j = 1;; ++j) {
        Rational coef = bernoulli_exact(static_cast<unsigned>(2 * j)) /
                        Rational(Int(2 * j) * Int(2 * j - 1));
        RealBall term = zpow.mul_rational(coef);
        RealBall next_zpow = zpow * invz2;
        Rational next_coef = bernoulli_exact(static_cast<unsigned>(2 * j + 2)) /
                             Rational(Int(2 * j + 2) * Int(2 * j + 1));
        RealBall next_mag = next_zpow.mul_rational(next_coef).abs_ub();
        acc = acc + term;
        // stop when the bound is below target or the asymptotic series turns
        mpfr_t tgt;
        mpfr_init2(tgt, 64);
        mpfr_set_ui_2exp(tgt, 1, -(wp + 8), MPFR_RNDN);
        bool done = mpfr_cmp(next_mag.mid(), tgt) < 0 || j >= max_j;
        mpfr_clear(tgt);
        if (done) {
            acc.add_error(next_mag.mul_rational(Rational(2)));
            break;
        }
        zpow = next_zpow;
    }
    return acc;
}

inline RealBall gamma_rational(const Rational& x, mpfr_prec_t wp) {
    long n = static_cast<long>(wp * 12 / 100) + 10; // raise to z = x + n
    Rational z = x + Rational(n);
    RealBall lg = log_gamma_stirling(z, wp);
    RealBall g = lg.exp();
    Rational prod(1);
    for (long k = 0; k < n; ++k) prod *= (x + Rational(k));
    return g / RealBall::from_rational(prod, wp);
}

} // namespace detail

// Constants kernel with an in-memory (and optional on-disk) cache.
// Disk records are hex-float serialized, schema-versioned, idempotent.
class ConstantCache {
  public:
    static ConstantCache& instance() {
        static ConstantCache c;
        return c;
    }

    void set_dir(const std::string& dir) {
        std::lock_guard<std::mutex> lock(mu_);
        dir_ = dir;
        if (!dir_.empty()) std::filesystem::create_directories(dir_);
    }

    std::string dir() const {
        std::lock_guard<std::mutex> lock(mu_);
        return dir_;
    }

    void clear_memory() {
        std::lock_guard<std::mutex> lock(mu_);
        mem_.clear();
    }

    RealBall get(const ConstantKey& key, mpfr_prec_t prec);

    size_t disk_entries() const {
        std::lock_guard<std::mutex> lock(mu_);
        if (dir_.empty() || !std::filesystem::exists(dir_)) return 0;
        size_t n = 0;
        for (auto& e : std::filesystem::directory_iterator(dir_))
            if (e.path().extension() == ".const") ++n;
        return n;
    }

    void clear_disk() {
        std::lock_guard<std::mutex> lock(mu_);
        if (dir_.empty() || !std::filesystem::exists(dir_)) return;
        for (auto& e : std::filesystem::directory_iterator(dir_))
            if (e.path().extension() == ".const") std::filesystem::remove(e.path());
    }

  private:
    static RealBall compute(const ConstantKey& key, mpfr_prec_t prec);

    std::string file_for(const ConstantKey& key, mpfr_prec_t prec) const {
        std::string name = key.str();
        for (auto& c : name)
            if (c == '(' || c == ')' || c == '/' || c == ',') c = '_';
        return dir_ + "/" + name + "_p" + std::to_string(prec) + ".const";
    }

    bool load_disk(const ConstantKey& key, mpfr_prec_t prec, RealBall& out) const {
        if (dir_.empty()) return false;
        std::ifstream in(file_for(key, prec));
        if (!in) return false;
        std::string header, k, midline, radline;
        std::getline(in, header);
        if (header != "certsum-constant 1") return false;
        std::getline(in, k);
        if (k != key.str()) return false;
        std::getline(in, midline);
        std::getline(in, radline);
        if (midline.rfind("mid ", 0) != 0 || radline.rfind("rad ", 0) != 0) return false;
        return RealBall::from_hex_strings(midline.substr(4), radline.substr(4), prec, out);
    }

    void store_disk(const ConstantKey& key, mpfr_prec_t prec, const RealBall& b) const {
        if (dir_.empty()) return;
        std::string path = file_for(key, prec);
        std::string tmp = path + ".tmp";
        {
            std::ofstream out(tmp);
            char* midhex = nullptr;
            char* radhex = nullptr;
            mpfr_asprintf(&midhex, "%Ra", b.mid());
            mpfr_asprintf(&radhex, "%Ra", b.rad());
            out << "certsum-constant 1\n"
                << key.str() << "\n"
                << "mid " << midhex << "\n"
                << "rad " << radhex << "\n";
            mpfr_free_str(midhex);
            mpfr_free_str(radhex);
        }
        std::error_code ec;
        std::filesystem::rename(tmp, path, ec);
    }

    mutable std::mutex mu_;
    std::string dir_;
    std::map<std::pair<std::string, long>, RealBall> mem_;
};

inline RealBall ConstantCache::get(const ConstantKey& key, mpfr_prec_t prec) {
    auto id = std::make_pair(key.str(), static_cast<long>(prec));
    {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = mem_.find(id);
        if (it != mem_.end()) return it->second;
        RealBall fromdisk;
        if (load_disk(key, prec, fromdisk)) {
            mem_.emplace(id, fromdisk);
            return fromdisk;
        }
    }
    RealBall v = compute(key, prec);
    {
        std::lock_guard<std::mutex> lock(mu_);
        mem_.emplace(id, v);
        store_disk(key, prec, v);
    }
    return v;
}

inline RealBall ConstantCache::compute(const ConstantKey& key, mpfr_prec_t prec) {
    using Tag = ConstantKey::Tag;
    mpfr_prec_t wp = prec + 32;
    switch (key.tag) {
        case Tag::Pi:
            return RealBall::pi(prec);
        case Tag::Catalan: {
            // G = beta(2) via Hurwitz decomposition mod 4
            RealBall z1 = detail::hurwitz_zeta(2, Rational(1, 4), wp);
            RealBall z3 = detail::hurwitz_zeta(2, Rational(3, 4), wp);
            return (z1 - z3).mul_rational(Rational(1, 16));
        }
        case Tag::Zeta: {
            long n = key.n;
            if (n % 2 == 0) {
                // zeta(2m) = (-1)^(m+1) B_2m (2pi)^(2m) / (2 (2m)!)
                long m = n / 2;
                Rational b = bernoulli_exact(static_cast<unsigned>(n));
                Int fact;
                mpz_fac_ui(fact.get_mpz_t(), static_cast<unsigned long>(n));
                Rational coef = b / (Rational(2) * Rational(fact));
                if (m % 2 == 0) coef = -coef;
                RealBall p2 = RealBall::pi(wp).mul_rational(Rational(2)).pow_si(n);
                return p2.mul_rational(coef);
            }
            return detail::hurwitz_zeta(n, Rational(1), wp);
        }
        case Tag::Beta: {
            long n = key.n;
            if (n == 1) return RealBall::pi(wp).mul_rational(Rational(1, 4));
            RealBall z1 = detail::hurwitz_zeta(n, Rational(1, 4), wp);
            RealBall z3 = detail::hurwitz_zeta(n, Rational(3, 4), wp);
            return (z1 - z3).mul_rational(pow_rational(Rational(1, 4), n));
        }
        case Tag::K3: {
            RealBall z1 = detail::hurwitz_zeta(2, Rational(1, 3), wp);
            RealBall z2 = detail::hurwitz_zeta(2, Rational(2, 3), wp);
            return (z1 - z2).mul_rational(Rational(1, 9));
        }
        case Tag::L8: {
            RealBall z1 = detail::hurwitz_zeta(2, Rational(1, 8), wp);
            RealBall z3 = detail::hurwitz_zeta(2, Rational(3, 8), wp);
            RealBall z5 = detail::hurwitz_zeta(2, Rational(5, 8), wp);
            RealBall z7 = detail::hurwitz_zeta(2, Rational(7, 8), wp);
            return (z1 + z3 - z5 - z7).mul_rational(Rational(1, 64));
        }
        case Tag::LogQ:
            return RealBall::from_rational(key.q, wp).log();
        case Tag::SqrtQ:
            return RealBall::from_rational(key.q, wp).sqrt();
        case Tag::GammaRat:
            return detail::gamma_rational(key.q, wp);
        case Tag::GoldenPhi: {
            RealBall s5 = RealBall::exact_long(5, wp).sqrt();
            return (s5 + RealBall::exact_long(1, wp)).mul_rational(Rational(1, 2));
        }
    }
    throw std::logic_error("unknown constant");
}

inline RealBall constant(const ConstantKey& key, mpfr_prec_t prec) {
    return ConstantCache::instance().get(key, prec);
}

} // namespace certsum
