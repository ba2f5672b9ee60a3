#ifndef SHIMCM_SHIMURA_HPP
#define SHIMCM_SHIMURA_HPP

#include <stdexcept>
#include <string>
#include <vector>

#include "arith.hpp"
#include "orders.hpp"

// Quaternion-discriminant data and level-1 facts for X_0^D(N): splitting
// profile D(K) and b, CM point counts, base residue fields, elliptic point
// counts and the genus.

namespace shimcm {

struct splitting_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct QuaternionDisc {
    i64 D = 1;
    std::vector<i64> primes;
};

// Accepts exactly the squarefree products of an even, positive number of
// primes. D = 1 gets its own message: that is the elliptic modular case,
// which this library deliberately does not handle.
inline QuaternionDisc validate_quaternion_disc(i64 D)
{
    if (D < 1)
        throw std::invalid_argument("quaternion discriminant must be positive");
    if (D == 1)
        throw std::invalid_argument(
            "D = 1 is the elliptic modular case, not a quaternion discriminant");
    QuaternionDisc q;
    q.D = D;
    for (auto const & pp : factorize(D)) {
        if (pp.exponent > 1)
            throw std::invalid_argument(
                "not a quaternion discriminant (not squarefree): " + std::to_string(D));
        q.primes.push_back(pp.prime);
    }
    if (q.primes.size() % 2)
        throw std::invalid_argument(
            "not a quaternion discriminant (odd number of primes): " + std::to_string(D));
    return q;
}

inline bool is_quaternion_disc(i64 D)
{
    if (D <= 1)
        return false;
    int n = 0;
    for (auto const & pp : factorize(D)) {
        if (pp.exponent > 1)
            return false;
        n++;
    }
    return n % 2 == 0;
}

struct SplittingProfile {
    i64 D;
    i64 delta_K;
    i64 DK;      // product of the primes of D inert in K
    int b;       // number of those primes, = omega(DK)
};

// K splits B exactly when no prime of D splits in K; otherwise this throws.
inline SplittingProfile splitting_profile(i64 D, i64 delta_K)
{
    auto q = validate_quaternion_disc(D);
    SplittingProfile s{D, delta_K, 1, 0};
    for (i64 p : q.primes) {
        int k = kronecker(delta_K, p);
        if (k == 1)
            throw splitting_error("K does not split B: " + std::to_string(p) +
                                  " splits in K (delta_K = " + std::to_string(delta_K) + ")");
        if (k == -1) {
            s.DK = checked_mul(s.DK, p);
            s.b++;
        }
    }
    return s;
}

inline bool splits(i64 D, i64 delta_K)
{
    for (auto const & pp : factorize(D))
        if (kronecker(delta_K, pp.prime) == 1)
            return false;
    return true;
}

// Number of o(f)-CM points on X^D(1): 2^b * h(o(f)).
inline i64 cm_point_count_level1(i64 D, i64 delta)
{
    auto [delta_K, f] = decompose_discriminant(delta);
    auto s = splitting_profile(D, delta_K);
    return checked_mul(i64{1} << s.b, class_number_formula(delta));
}

struct Level1Field {
    i64 conductor;   // ring class conductor f of the CM order
    bool index2;     // residue field is an index-2 subfield of K(f)
    i64 abs_degree;  // [Q(x) : Q]
};

// Residue field of a delta-CM point on X^D(1): the ring class field K(f)
// when some prime of D is inert in K, an index-2 subfield of K(f) when all
// of them ramify.
inline Level1Field residue_field_level1(i64 D, i64 delta)
{
    auto [delta_K, f] = decompose_discriminant(delta);
    auto s = splitting_profile(D, delta_K);
    i64 h = class_number_formula(delta);
    if (s.DK == 1)
        return {f, true, h};
    return {f, false, checked_mul(2, h)};
}

// e_1(D,N) and e_3(D,N): counts of -4- and -3-CM points, by the product
// formulas over the distinct primes of D and N, with the classical Eichler
// convention e_1 = 0 when 4 | N and e_3 = 0 when 9 | N.
inline std::pair<i64, i64> elliptic_counts(i64 D, i64 N)
{
    validate_quaternion_disc(D);
    if (N < 1)
        throw std::invalid_argument("level must be positive");
    if (std::gcd(D, N) != 1)
        throw std::invalid_argument("gcd(D,N) must be 1");
    i64 e1 = 1, e3 = 1;
    for (auto const & pp : factorize(D)) {
        e1 *= 1 - kronecker(-4, pp.prime);
        e3 *= 1 - kronecker(-3, pp.prime);
    }
    auto fN = factorize(N);
    for (auto const & pp : fN) {
        e1 *= 1 + kronecker(-4, pp.prime);
        e3 *= 1 + kronecker(-3, pp.prime);
    }
    if (N % 4 == 0)
        e1 = 0;
    if (N % 9 == 0)
        e3 = 0;
    return {e1, e3};
}

// g(X_0^D(N)) = 1 + phi(D)psi(N)/12 - e_1/4 - e_3/3, evaluated exactly.
inline i64 genus(i64 D, i64 N)
{
    auto [e1, e3] = elliptic_counts(D, N);
    i64 num = checked_mul(euler_phi(D), dedekind_psi(N));
    num = checked_add(num, -checked_mul(3, e1));
    num = checked_add(num, -checked_mul(4, e3));
    if (num % 12)
        throw std::logic_error("genus formula did not give an integer for D=" +
                               std::to_string(D) + " N=" + std::to_string(N));
    return 1 + num / 12;
}

} // namespace shimcm

#endif
