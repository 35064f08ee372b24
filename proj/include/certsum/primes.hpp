#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

namespace certsum {

// Deterministic primality via a shared sieve. Verdicts must be reproducible,
// so no probabilistic tests anywhere.
class PrimeSieve {
  public:
    explicit PrimeSieve(uint32_t limit = 1u << 20) : limit_(limit), composite_(limit + 1, false) {
        composite_[0] = composite_[1] = true;
        for (uint64_t i = 2; i * i <= limit; ++i)
            if (!composite_[i])
                for (uint64_t j = i * i; j <= limit; j += i) composite_[j] = true;
    }

    bool is_prime(uint64_t n) const {
        if (n > limit_) throw std::out_of_range("PrimeSieve: beyond sieve limit");
        return !composite_[n];
    }

    std::vector<uint32_t> primes_in(uint32_t lo, uint32_t hi) const {
        std::vector<uint32_t> out;
        if (hi > limit_) throw std::out_of_range("PrimeSieve: beyond sieve limit");
        for (uint32_t n = lo < 2 ? 2 : lo; n <= hi; ++n)
            if (!composite_[n]) out.push_back(n);
        return out;
    }

  private:
    uint32_t limit_;
    std::vector<bool> composite_;
};

inline const PrimeSieve& sieve() {
    static PrimeSieve s;
    return s;
}

inline bool is_prime(uint64_t n) { return sieve().is_prime(n); }

} // namespace certsum
