#ifndef SHIMCM_ARITH_HPP
#define SHIMCM_ARITH_HPP

#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

// Exact elementary number theory on 64-bit signed integers. Overflow is a
// checked error, never wraparound; everything here is a pure function.

namespace shimcm {

using i64 = std::int64_t;

struct overflow_error : std::overflow_error {
    overflow_error() : std::overflow_error("shimcm: 64-bit overflow") {}
};

inline i64 checked_add(i64 a, i64 b)
{
    i64 r;
    if (__builtin_add_overflow(a, b, &r))
        throw overflow_error();
    return r;
}

inline i64 checked_mul(i64 a, i64 b)
{
    i64 r;
    if (__builtin_mul_overflow(a, b, &r))
        throw overflow_error();
    return r;
}

inline i64 checked_pow(i64 base, int exp)
{
    i64 r = 1;
    for (int i = 0; i < exp; i++)
        r = checked_mul(r, base);
    return r;
}

struct PrimePower {
    i64 prime;
    int exponent;

    friend bool operator==(PrimePower const &, PrimePower const &) = default;
};

// Prime factorization, primes strictly ascending. n = 1 gives the empty list.
using Factorization = std::vector<PrimePower>;

// Deterministic trial division with a 2-3-5 wheel. All inputs in scope are
// well below 10^8, where this is instant; it stays exact up to 2^63.
inline Factorization factorize(i64 n)
{
    if (n < 1)
        throw std::invalid_argument("factorize: n must be >= 1");
    Factorization out;
    auto strip = [&](i64 p) {
        if (n % p)
            return;
        int e = 0;
        while (n % p == 0) {
            n /= p;
            e++;
        }
        out.push_back({p, e});
    };
    strip(2);
    strip(3);
    strip(5);
    static constexpr int wheel[8] = {4, 2, 4, 2, 4, 6, 2, 6};
    i64 p = 7;
    int w = 0;
    while (p <= n / p) {
        strip(p);
        p += wheel[w];
        w = (w + 1) & 7;
    }
    if (n > 1)
        out.push_back({n, 1});
    return out;
}

inline i64 unfactorize(Factorization const & f)
{
    i64 n = 1;
    for (auto const & pp : f)
        n = checked_mul(n, checked_pow(pp.prime, pp.exponent));
    return n;
}

inline bool is_prime(i64 n)
{
    if (n < 2)
        return false;
    auto f = factorize(n);
    return f.size() == 1 && f[0].exponent == 1;
}

inline bool is_squarefree(i64 n)
{
    for (auto const & pp : factorize(n))
        if (pp.exponent > 1)
            return false;
    return true;
}

inline int omega(i64 n) { return static_cast<int>(factorize(n).size()); }

inline int ord_p(i64 n, i64 p)
{
    int e = 0;
    while (n % p == 0) {
        n /= p;
        e++;
    }
    return e;
}

// Kronecker symbol (a/n) for n >= 1, completely multiplicative in n, with
// (a/2) = 0, +1, -1 for a even, a = +-1 (mod 8), a = +-3 (mod 8).
inline int kronecker(i64 a, i64 n)
{
    if (n < 1)
        throw std::invalid_argument("kronecker: n must be >= 1");
    if (n == 1)
        return 1;
    int result = 1;
    // peel off the even part of n
    while (n % 2 == 0) {
        if (a % 2 == 0)
            return 0;
        i64 r = ((a % 8) + 8) % 8;
        if (r == 3 || r == 5)
            result = -result;
        n /= 2;
    }
    // Jacobi symbol (a/n) for odd n > 0 by reciprocity
    a %= n;
    if (a < 0)
        a += n;
    while (a != 0) {
        while (a % 2 == 0) {
            a /= 2;
            i64 r = n % 8;
            if (r == 3 || r == 5)
                result = -result;
        }
        std::swap(a, n);
        if (a % 4 == 3 && n % 4 == 3)
            result = -result;
        a %= n;
    }
    return n == 1 ? result : 0;
}

inline i64 euler_phi(i64 n)
{
    if (n < 1)
        throw std::invalid_argument("euler_phi: n must be >= 1");
    i64 r = 1;
    for (auto const & pp : factorize(n))
        r = checked_mul(r, checked_mul(checked_pow(pp.prime, pp.exponent - 1),
                                       pp.prime - 1));
    return r;
}

// Dedekind psi: psi(1) = 1, psi(l^a) = l^a + l^(a-1), multiplicative.
inline i64 dedekind_psi(i64 n)
{
    if (n < 1)
        throw std::invalid_argument("dedekind_psi: n must be >= 1");
    i64 r = 1;
    for (auto const & pp : factorize(n))
        r = checked_mul(r, checked_mul(checked_pow(pp.prime, pp.exponent - 1),
                                       pp.prime + 1));
    return r;
}

inline i64 gcd(i64 a, i64 b) { return std::gcd(a, b); }

inline i64 lcm(i64 a, i64 b)
{
    if (a == 0 || b == 0)
        return 0;
    return checked_mul(a / std::gcd(a, b), b);
}

} // namespace shimcm

#endif
