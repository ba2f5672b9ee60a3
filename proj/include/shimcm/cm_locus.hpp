#ifndef SHIMCM_CM_LOCUS_HPP
#define SHIMCM_CM_LOCUS_HPP

#include <algorithm>
#include <map>
#include <optional>
#include <tuple>
#include <vector>

#include "arith.hpp"
#include "orders.hpp"
#include "shimura.hpp"

// The core engine: exact delta-CM fiber descriptions of the covering
// X_0^D(N) -> X^D(1) via the prime-power path-type class tables, tensor
// compilation to general level, primitive residue fields and degrees, and
// least CM degrees on X_0^D(N) and X_1^D(N).

namespace shimcm {

// A residue field up to isomorphism: the ring class field K(conductor) of
// the CM field, or a totally complex index-2 subfield of it.
struct ResidueFieldDesc {
    i64 delta_K = 0;
    i64 conductor = 1;
    bool index2 = false;
    i64 abs_degree = 0;

    friend bool operator==(ResidueFieldDesc const &, ResidueFieldDesc const &) = default;
};

struct PointClass {
    i64 count = 0; // closed-point classes, totaled over all 2^b base points
    ResidueFieldDesc field;
    int e = 1;           // ramification index over X^D(1)
    i64 rel_degree = 1;  // degree over the base CM point's residue field
    i64 raw_conductor = 1; // ring class conductor before K(c) = K collapsing
};

struct FiberDesc {
    i64 D = 0, N = 0, delta = 0;
    int b = 0;
    i64 DK = 1;
    ResidueFieldDesc base;
    std::vector<PointClass> classes;

    i64 mass() const
    {
        i64 m = 0;
        for (auto const & c : classes)
            m = checked_add(m, checked_mul(c.count, checked_mul(c.e, c.rel_degree)));
        return m;
    }

    i64 least_degree() const
    {
        i64 best = 0;
        for (auto const & c : classes)
            if (best == 0 || c.field.abs_degree < best)
                best = c.field.abs_degree;
        return best;
    }

    // counts over a single base CM point instead of totals over all 2^b
    FiberDesc per_fiber_view() const
    {
        FiberDesc out = *this;
        for (auto & c : out.classes) {
            if (c.count % (i64{1} << b))
                throw std::logic_error("class count not divisible by 2^b");
            c.count /= i64{1} << b;
        }
        return out;
    }
};

namespace detail {

// Everything the prime-power tables branch on.
struct FiberContext {
    i64 D = 0, delta = 0, delta_K = 0, f = 1, f0 = 1;
    i64 ell = 0;
    int a = 0, L = 0;
    int b = 0;
    i64 DK = 1;
    bool dk1 = false; // D(K) = 1: index-2 residue fields occur
    int chiK = 0;     // (delta_K / ell)
    i64 h_base = 0;   // h(o(f))
    i64 base_degree = 0;
};

// Ring class fields with different conductors can coincide: K(2c) = K(c)
// for odd c when 2 splits in K, and K(c) = K for c^2 delta_K in
// {-12, -16, -27}. Normalize so that equal fields compare equal.
inline i64 canonical_conductor(i64 delta_K, i64 c)
{
    if (c % 2 == 0 && c % 4 != 0 && kronecker(delta_K, 2) == 1)
        c /= 2;
    if ((delta_K == -3 && (c == 2 || c == 3)) || (delta_K == -4 && c == 2))
        return 1;
    return c;
}

class ClassEmitter {
  public:
    ClassEmitter(FiberContext const & ctx, ClassNumberCache & cache)
        : ctx_(ctx), cache_(cache)
    {
    }

    // a batch of classes with residue field K(ell^j f) or its index-2 subfield
    void add(i64 count, int j, bool index2, int e = 1)
    {
        add_conductor(count, checked_mul(checked_pow(ctx_.ell, j), ctx_.f), index2, e);
    }

    void add_conductor(i64 count, i64 raw_cond, bool index2, int e)
    {
        if (count == 0)
            return;
        if (count < 0)
            throw std::logic_error("negative class count");
        i64 h = cache_.h(checked_mul(checked_mul(raw_cond, raw_cond), ctx_.delta_K));
        i64 abs = index2 ? h : checked_mul(2, h);
        if (abs % ctx_.base_degree)
            throw std::logic_error("class degree not divisible by base degree");
        i64 canon = canonical_conductor(ctx_.delta_K, raw_cond);
        auto key = std::tuple(canon, index2, e);
        auto it = merged_.find(key);
        if (it == merged_.end()) {
            PointClass cl;
            cl.count = count;
            cl.field = {ctx_.delta_K, canon, index2, abs};
            cl.e = e;
            cl.rel_degree = abs / ctx_.base_degree;
            cl.raw_conductor = raw_cond;
            merged_.emplace(key, cl);
        } else {
            it->second.count = checked_add(it->second.count, count);
        }
    }

    std::vector<PointClass> take()
    {
        std::vector<PointClass> out;
        out.reserve(merged_.size());
        for (auto & [key, cl] : merged_)
            out.push_back(cl);
        return out;
    }

  private:
    FiberContext const & ctx_;
    ClassNumberCache & cache_;
    std::map<std::tuple<i64, bool, int>, PointClass> merged_;
};

inline FiberContext make_context(i64 D, i64 delta, ClassNumberCache & cache)
{
    FiberContext ctx;
    ctx.D = D;
    ctx.delta = delta;
    std::tie(ctx.delta_K, ctx.f) = decompose_discriminant(delta);
    auto s = splitting_profile(D, ctx.delta_K);
    ctx.b = s.b;
    ctx.DK = s.DK;
    ctx.dk1 = s.DK == 1;
    ctx.h_base = cache.h(delta);
    ctx.base_degree = ctx.dk1 ? ctx.h_base : checked_mul(2, ctx.h_base);
    return ctx;
}

inline void set_prime(FiberContext & ctx, i64 ell, int a)
{
    if (!is_prime(ell))
        throw std::invalid_argument("level prime expected");
    if (ctx.D % ell == 0)
        throw std::invalid_argument("level must be coprime to D");
    ctx.ell = ell;
    ctx.a = a;
    ctx.L = ord_p(ctx.f, ell);
    ctx.f0 = ctx.f / checked_pow(ell, ctx.L);
    ctx.chiK = kronecker(ctx.delta_K, ell);
}

inline i64 pow2(int e)
{
    if (e < 0)
        throw std::logic_error("negative power of two in class count");
    return i64{1} << e;
}

// Class tables for a prime-power level ell^a over an order with
// f0^2 delta_K < -4. Counts follow the path-type analysis; the D(K) != 1
// branch emits ring class fields only, the D(K) = 1 branch splits between
// ring class fields and index-2 subfields.
inline void emit_prime_power_generic(FiberContext const & c, ClassEmitter & out)
{
    int const a = c.a, L = c.L, b = c.b;
    i64 const ell = c.ell;
    bool const dk1 = c.dk1;
    int const chi = c.chiK;
    auto mn = [](i64 x, i64 y) { return std::min<i64>(x, y); };
    auto mx0 = [](i64 x) { return static_cast<int>(std::max<i64>(x, 0)); };

    // I: strictly descending
    out.add(pow2(b), a, dk1);
    // II: strictly ascending
    if (a <= L)
        out.add(pow2(b), 0, dk1);
    // III: the ramified surface edge, then descending
    if (L == 0 && chi == 0 && a >= 1)
        out.add(pow2(b), a - 1, dk1);
    // IV: h split-surface edges after no ascent
    if (L == 0 && chi == 1)
        for (int h = 1; h <= a; h++)
            out.add(dk1 ? pow2(b) : pow2(b + 1), a - h, false);
    // X: full ascent, then horizontal the rest of the way
    if (a > L && L >= 1 && chi == 1)
        out.add(dk1 ? pow2(b) : pow2(b + 1), 0, false);

    if (ell > 2) {
        // V: up then down, never reaching the surface
        if (L >= 2)
            for (i64 cc = 1; cc <= mn(a - 1, L - 1); cc++) {
                i64 n = checked_mul(ell - 1, checked_pow(ell, static_cast<int>(mn(cc, a - cc)) - 1));
                out.add(dk1 ? n * pow2(b) / 2 : n * pow2(b), mx0(a - 2 * cc), false);
            }
        if (a >= L + 1 && L >= 1) {
            int m = static_cast<int>(mn(L, a - L));
            if (chi == -1) {
                // VI: full ascent then immediate descent, inert surface
                i64 n = checked_pow(ell, m);
                if (dk1) {
                    out.add((n - 1) * pow2(b) / 2, mx0(a - 2 * L), false);
                    out.add(pow2(b), mx0(a - 2 * L), true);
                } else {
                    out.add(n * pow2(b), mx0(a - 2 * L), false);
                }
            } else if (chi == 0) {
                // VII: full ascent then immediate descent, ramified surface
                i64 n = checked_mul(ell - 1, checked_pow(ell, m - 1));
                out.add(dk1 ? n * pow2(b) / 2 : n * pow2(b), mx0(a - 2 * L), false);
                // VIII: the surface loop in the middle
                int m8 = static_cast<int>(mn(L, a - L - 1));
                i64 n8 = checked_pow(ell, m8);
                if (dk1) {
                    out.add((n8 - 1) * pow2(b) / 2, mx0(a - 2 * L - 1), false);
                    out.add(pow2(b), mx0(a - 2 * L - 1), true);
                } else {
                    out.add(n8 * pow2(b), mx0(a - 2 * L - 1), false);
                }
            } else {
                // IX: full ascent then immediate descent, split surface
                i64 n = checked_mul(ell - 2, checked_pow(ell, m - 1));
                if (dk1) {
                    out.add((n - 1) * pow2(b) / 2, mx0(a - 2 * L), false);
                    out.add(pow2(b), mx0(a - 2 * L), true);
                } else {
                    out.add(n * pow2(b), mx0(a - 2 * L), false);
                }
                // XI: full ascent, h surface edges, then descent
                if (a >= L + 2)
                    for (int h = 1; h <= a - L - 1; h++) {
                        i64 nxi = checked_mul(
                            ell - 1,
                            checked_pow(ell, static_cast<int>(mn(L, a - L - h)) - 1));
                        out.add(dk1 ? nxi * pow2(b) : nxi * pow2(b + 1),
                                mx0(a - 2 * L - h), false);
                    }
            }
        }
        return;
    }

    // ell = 2
    if (chi != 0) {
        // V1
        if (L >= 2 && a >= 2)
            out.add(pow2(b), a - 2, dk1);
        // V2: the path (a-1,0,1) stays at or below its starting level, so it
        // lands on K(f); only then does the mass identity close
        if (L >= a && a >= 3)
            out.add(pow2(b), 0, dk1);
        // V3
        if (a >= L + 1 && L >= 3) {
            int m = static_cast<int>(mn(a - L + 1, L - 1));
            if (dk1) {
                out.add((pow2(m - 2) - 1) * pow2(b), mx0(a - 2 * L + 2), false);
                out.add(pow2(b + 1), mx0(a - 2 * L + 2), true);
            } else {
                out.add(pow2(m + b - 1), mx0(a - 2 * L + 2), false);
            }
        }
        // V4
        for (i64 cc = 2; cc <= mn(L - 2, a - 2); cc++) {
            int m = static_cast<int>(mn(cc, a - cc));
            out.add(dk1 ? pow2(m + b - 2) : pow2(m + b - 1), mx0(a - 2 * cc), false);
        }
        // VI (inert surface)
        if (chi == -1 && a >= L + 1 && L >= 1) {
            int m = static_cast<int>(mn(L, a - L));
            out.add(dk1 ? pow2(m + b - 1) : pow2(m + b), mx0(a - 2 * L), false);
        }
        // XI (split surface)
        if (chi == 1 && a >= L + 2 && L >= 1)
            for (int h = 1; h <= a - L - 1; h++) {
                int m = static_cast<int>(mn(L, a - L - h));
                out.add(dk1 ? pow2(m + b - 1) : pow2(m + b), mx0(a - 2 * L - h), false);
            }
        return;
    }

    // ell = 2 ramified in K; all these types start at level L >= 1
    int const ord2 = ord_p(-c.delta_K, 2);
    if (L >= 1) {
        // V1
        if (L >= 2 && a >= 2)
            out.add(pow2(b), a - 2, dk1);
        // V2: lands on K(f) here, unlike the unramified table
        if (L >= a && a >= 3)
            out.add(pow2(b), 0, dk1);
        // V3
        for (i64 cc = 2; cc <= mn(L - 1, a - 2); cc++) {
            int m = static_cast<int>(mn(cc, a - cc));
            out.add(dk1 ? pow2(m + b - 2) : pow2(m + b - 1), mx0(a - 2 * cc), false);
        }
        if (a >= L + 1) {
            // VI
            if (L == 1) {
                out.add(pow2(b), a - 2, dk1); // VI1
            } else if (a == L + 1) {
                out.add(pow2(b), 0, dk1); // VI2
            } else { // VI3: a >= L+2 >= 4
                int m = static_cast<int>(mn(L, a - L));
                if (ord2 == 2) {
                    if (dk1) {
                        out.add((pow2(m - 2) - 1) * pow2(b), mx0(a - 2 * L), false);
                        out.add(pow2(b + 1), mx0(a - 2 * L), true);
                    } else {
                        out.add(pow2(m + b - 1), mx0(a - 2 * L), false);
                    }
                } else {
                    out.add(dk1 ? pow2(m + b - 2) : pow2(m + b - 1), mx0(a - 2 * L),
                            false);
                }
            }
            // VIII
            if (a == L + 1) {
                out.add(pow2(b), 0, dk1); // VIII1
            } else { // VIII2
                int m = static_cast<int>(mn(L, a - 1 - L));
                if (ord2 == 2) {
                    out.add(dk1 ? pow2(m + b - 1) : pow2(m + b), mx0(a - 2 * L - 1),
                            false);
                } else {
                    if (dk1) {
                        out.add((pow2(m - 1) - 1) * pow2(b), mx0(a - 2 * L - 1), false);
                        out.add(pow2(b + 1), mx0(a - 2 * L - 1), true);
                    } else {
                        out.add(pow2(m + b), mx0(a - 2 * L - 1), false);
                    }
                }
            }
        }
    }
}

// One prime-power class over a -3 or -4 CM point, keyed by the number of
// descending edges d; ramified (e = 2 or 3) exactly when d >= 1.
struct SpecialClass {
    int d;
    int e;
    i64 count_per_base;
};

inline std::vector<SpecialClass> special_prime_power_classes(FiberContext const & c)
{
    if (c.dk1)
        throw std::logic_error("D(K) = 1 cannot occur for a -3 or -4 CM point");
    int const a = c.a;
    int const u = c.delta == -3 ? 3 : 2;
    std::vector<SpecialClass> out;
    if (c.chiK == -1) {
        out.push_back({a, u, 1});
    } else if (c.chiK == 0) {
        out.push_back({a, u, 1});
        if (a >= 2)
            out.push_back({a - 1, u, 1});
        else
            out.push_back({0, 1, 1});
    } else {
        out.push_back({a, u, 1});
        for (int d = a - 1; d >= 1; d--)
            out.push_back({d, u, 2});
        out.push_back({0, 1, 2});
    }
    return out;
}

} // namespace detail

// The complete delta-CM class list of the fiber of X_0^D(ell^a) -> X^D(1).
inline FiberDesc fiber_prime_power(i64 D, i64 ell, int a, i64 delta,
                                   ClassNumberCache & cache)
{
    if (a < 1)
        throw std::invalid_argument("fiber_prime_power: a must be >= 1");
    auto ctx = detail::make_context(D, delta, cache);
    detail::set_prime(ctx, ell, a);

    FiberDesc fd;
    fd.D = D;
    fd.N = checked_pow(ell, a);
    fd.delta = delta;
    fd.b = ctx.b;
    fd.DK = ctx.DK;
    fd.base = {ctx.delta_K, ctx.f, ctx.dk1, ctx.base_degree};

    detail::ClassEmitter out(ctx, cache);
    if (delta >= -4)
        for (auto const & sc : detail::special_prime_power_classes(ctx))
            out.add(checked_mul(sc.count_per_base, detail::pow2(ctx.b)), sc.d, false,
                    sc.e);
    else
        detail::emit_prime_power_generic(ctx, out);
    fd.classes = out.take();

    i64 want = checked_mul(i64{1} << ctx.b, dedekind_psi(fd.N));
    if (fd.mass() != want)
        throw std::logic_error("mass identity violated at prime power level");
    return fd;
}

inline FiberDesc fiber_prime_power(i64 D, i64 ell, int a, i64 delta)
{
    ClassNumberCache cache;
    return fiber_prime_power(D, ell, a, delta, cache);
}

// The delta-CM class list at general level N coprime to D. For delta < -4
// each r-tuple of prime-power classes contributes points of the compositum
// field: conductor lcm, index-2 only when every factor is index-2,
// multiplicity by the 2^(s-1) collapsing rule. For delta in {-3,-4} residue
// fields come from the per-prime descending-edge counts alone, with
// ramification at any single prime making the class ramified.
inline FiberDesc fiber_general(i64 D, i64 N, i64 delta, ClassNumberCache & cache)
{
    if (N < 1)
        throw std::invalid_argument("fiber_general: N must be >= 1");
    if (N > 1 && std::gcd(D, N) != 1)
        throw std::invalid_argument("fiber_general: gcd(D,N) must be 1");
    auto ctx = detail::make_context(D, delta, cache);

    FiberDesc fd;
    fd.D = D;
    fd.N = N;
    fd.delta = delta;
    fd.b = ctx.b;
    fd.DK = ctx.DK;
    fd.base = {ctx.delta_K, ctx.f, ctx.dk1, ctx.base_degree};

    auto factors = factorize(N);
    detail::ClassEmitter out(ctx, cache);
    i64 const two_b = detail::pow2(ctx.b);

    if (N == 1) {
        out.add(two_b, 0, ctx.dk1);
        fd.classes = out.take();
        return fd;
    }

    if (delta >= -4) {
        // tuples of (descending count, ramified?) across the primes of N
        std::vector<std::vector<detail::SpecialClass>> per_prime;
        for (auto const & pp : factors) {
            detail::set_prime(ctx, pp.prime, pp.exponent);
            per_prime.push_back(detail::special_prime_power_classes(ctx));
        }
        std::vector<std::size_t> idx(per_prime.size(), 0);
        int const u = delta == -3 ? 3 : 2;
        for (;;) {
            i64 count = 1, cond = 1;
            int e = 1;
            for (std::size_t i = 0; i < idx.size(); i++) {
                auto const & sc = per_prime[i][idx[i]];
                count = checked_mul(count, sc.count_per_base);
                cond = checked_mul(cond, checked_pow(factors[i].prime, sc.d));
                if (sc.e > 1)
                    e = u;
            }
            out.add_conductor(checked_mul(count, two_b), cond, false, e);
            std::size_t i = 0;
            while (i < idx.size() && ++idx[i] == per_prime[i].size()) {
                idx[i] = 0;
                i++;
            }
            if (i == idx.size())
                break;
        }
    } else {
        // per-prime class lists, counts divided down to a single base fiber
        std::vector<std::vector<PointClass>> per_prime;
        for (auto const & pp : factors) {
            auto sub = fiber_prime_power(D, pp.prime, pp.exponent, delta, cache);
            for (auto & cl : sub.classes) {
                if (cl.count % two_b)
                    throw std::logic_error("class count not divisible by 2^b");
                cl.count /= two_b;
            }
            per_prime.push_back(std::move(sub.classes));
        }
        std::vector<std::size_t> idx(per_prime.size(), 0);
        for (;;) {
            i64 tuple_count = 1;
            i64 cond = ctx.f;
            i64 rel_product = 1;
            int s = 0;
            for (std::size_t i = 0; i < idx.size(); i++) {
                auto const & cl = per_prime[i][idx[i]];
                tuple_count = checked_mul(tuple_count, cl.count);
                cond = checked_mul(cond, cl.raw_conductor / ctx.f);
                rel_product = checked_mul(rel_product, cl.rel_degree);
                if (!cl.field.index2)
                    s++;
            }
            bool index2 = s == 0;
            if (index2 && !ctx.dk1)
                throw std::logic_error("index-2 tuple without D(K) = 1");
            i64 h_cond = cache.h(checked_mul(checked_mul(cond, cond), ctx.delta_K));
            i64 abs = index2 ? h_cond : checked_mul(2, h_cond);
            i64 rel_F = abs / ctx.base_degree;
            if (rel_F == 0 || rel_product % rel_F)
                throw std::logic_error("tensor compilation: non-integral point count");
            out.add_conductor(checked_mul(tuple_count, rel_product / rel_F), cond,
                              index2, 1);
            std::size_t i = 0;
            while (i < idx.size() && ++idx[i] == per_prime[i].size()) {
                idx[i] = 0;
                i++;
            }
            if (i == idx.size())
                break;
        }
    }

    fd.classes = out.take();
    if (delta < -4)
        for (auto & cl : fd.classes)
            cl.count = checked_mul(cl.count, two_b);

    i64 want = checked_mul(two_b, dedekind_psi(N));
    if (fd.mass() != want)
        throw std::logic_error("mass identity violated at general level");
    return fd;
}

inline FiberDesc fiber_general(i64 D, i64 N, i64 delta)
{
    ClassNumberCache cache;
    return fiber_general(D, N, delta, cache);
}

// Primitive residue fields and degrees of the delta-CM locus on X_0^D(N):
// at most two fields (an index-2 subfield of K(B f) and possibly the ring
// class field K(C f)), at most two degrees.
struct PrimitiveData {
    std::vector<ResidueFieldDesc> fields; // 1 or 2
    std::vector<i64> degrees;             // primitive degrees, ascending
    i64 B = 1, C = 1;                     // conductor multipliers, C | B
    int s = 0;                            // number of primes with C_i < B_i
};

namespace detail {

struct PrimePrimitive {
    i64 B, C;
    bool case15b; // odd ell split with L >= 1 and a >= 2L+1
};

// Per-prime-power primitive conductor multipliers (the case analysis of the
// prime-power primitive residue fields).
inline PrimePrimitive prime_primitive(FiberContext const & c)
{
    i64 const ell = c.ell;
    int const a = c.a, L = c.L;
    auto P = [&](int e) { return checked_pow(ell, e); };
    if (ell == 2 && a == 1) { // 1.1
        if (kronecker(c.delta, 2) == -1)
            return {2, 2, false};
        return {1, 1, false};
    }
    if (L == 0) {
        int chi = kronecker(c.delta, ell); // = (delta_K / ell) here
        if (chi == 1)
            return {P(a), 1, false}; // 1.2
        if (chi == -1)
            return {P(a), P(a), false}; // 1.3
        return {P(a - 1), P(a - 1), false}; // 1.4
    }
    if (ell > 2) {
        if (c.chiK == 1) { // 1.5
            if (a <= 2 * L)
                return {1, 1, false};
            return {P(a - 2 * L), 1, true};
        }
        if (c.chiK == -1) { // 1.6
            if (a <= 2 * L)
                return {1, 1, false};
            return {P(a - 2 * L), P(a - 2 * L), false};
        }
        // 1.7
        if (a <= 2 * L + 1)
            return {1, 1, false};
        return {P(a - 2 * L - 1), P(a - 2 * L - 1), false};
    }
    // ell = 2, a >= 2, L >= 1
    if (c.chiK == 1) { // 1.8
        if (L == 1)
            return {P(a), 1, false};
        if (a <= 2 * L - 2)
            return {1, 1, false};
        return {P(a - 2 * L + 2), 1, false};
    }
    if (c.chiK == -1) { // 1.9
        if (L == 1)
            return {P(a), P(a - 2), false};
        if (a <= 2 * L - 2)
            return {1, 1, false};
        return {P(a - 2 * L + 2), P(std::max(a - 2 * L, 0)), false};
    }
    if (ord_p(-c.delta_K, 2) == 2) { // 1.10
        if (a <= 2 * L)
            return {1, 1, false};
        return {P(a - 2 * L), P(a - 2 * L - 1), false};
    }
    // 1.11
    if (a <= 2 * L + 1)
        return {1, 1, false};
    return {P(a - 2 * L - 1), P(a - 2 * L - 1), false};
}

} // namespace detail

inline PrimitiveData primitive_fields(i64 D, i64 N, i64 delta,
                                      ClassNumberCache & cache)
{
    if (N < 1 || (N > 1 && std::gcd(D, N) != 1))
        throw std::invalid_argument("primitive_fields: bad level");
    auto ctx = detail::make_context(D, delta, cache);

    PrimitiveData pd;
    bool all_15b = true;
    for (auto const & pp : factorize(N)) {
        detail::set_prime(ctx, pp.prime, pp.exponent);
        auto pr = detail::prime_primitive(ctx);
        pd.B = checked_mul(pd.B, pr.B);
        pd.C = checked_mul(pd.C, pr.C);
        if (pr.C < pr.B) {
            pd.s++;
            if (!pr.case15b)
                all_15b = false;
        }
    }

    i64 hB = cache.h(checked_mul(checked_mul(pd.B * ctx.f, pd.B * ctx.f), ctx.delta_K));
    i64 hC = cache.h(checked_mul(checked_mul(pd.C * ctx.f, pd.C * ctx.f), ctx.delta_K));
    i64 condB = detail::canonical_conductor(ctx.delta_K, pd.B * ctx.f);
    i64 condC = detail::canonical_conductor(ctx.delta_K, pd.C * ctx.f);

    if (!ctx.dk1) {
        // every residue field is a ring class field; the smallest one wins
        pd.fields.push_back({ctx.delta_K, condC, false, checked_mul(2, hC)});
        pd.degrees.push_back(checked_mul(2, hC));
        return pd;
    }
    i64 d1 = hB;
    if (pd.s == 0) {
        pd.fields.push_back({ctx.delta_K, condB, true, d1});
        pd.degrees.push_back(d1);
        return pd;
    }
    i64 d2 = checked_mul(2, hC);
    pd.fields.push_back({ctx.delta_K, condB, true, d1});
    pd.fields.push_back({ctx.delta_K, condC, false, d2});
    if (all_15b) {
        // two primitive degrees, neither dividing the other
        pd.degrees = {std::min(d1, d2), std::max(d1, d2)};
    } else {
        pd.degrees = {d2}; // d2 | d1 here
    }
    return pd;
}

// Least degree of a delta-CM point on X_0^D(N); always a multiple of
// h(o_delta).
inline i64 least_degree_order(i64 D, i64 N, i64 delta, ClassNumberCache & cache)
{
    auto pd = primitive_fields(D, N, delta, cache);
    i64 best = pd.degrees.front();
    for (i64 d : pd.degrees)
        best = std::min(best, d);
    return best;
}

inline i64 least_degree_order(i64 D, i64 N, i64 delta)
{
    ClassNumberCache cache;
    return least_degree_order(D, N, delta, cache);
}

struct LeastDegree {
    i64 degree = 0;
    i64 witness_delta = 0;
    bool conditional = false; // no order reached degree <= h_max
};

// Entries of the order table prepared for least-degree minimization:
// ascending |delta| with the conductor decomposition precomputed.
class OrderScanIndex {
  public:
    struct Item {
        i64 delta, delta_K, f, h, h_K;
    };

    OrderScanIndex(OrderTable const & table, i64 h_max) : h_max_(h_max)
    {
        for (i64 d = 3; d <= table.bound(); d++) {
            i64 m = d % 4;
            if (m != 0 && m != 3)
                continue;
            i64 h = table.h(-d);
            if (h > h_max)
                continue;
            auto [dK, f] = decompose_discriminant(-d);
            items_.push_back({-d, dK, f, h, table.h(dK)});
        }
    }

    std::vector<Item> const & items() const { return items_; }
    i64 h_max() const { return h_max_; }

  private:
    std::vector<Item> items_;
    i64 h_max_;
};

// d_CM(X_0^D(N)) minimized over all orders of class number <= h_max in the
// index. Ties break toward the smallest |delta|, then smallest conductor
// (the index is sorted that way). The result is unconditional once the
// minimum is <= h_max, since any order has degree >= its class number.
inline LeastDegree least_degree(i64 D, i64 N, OrderScanIndex const & index,
                                ClassNumberCache & cache)
{
    validate_quaternion_disc(D);
    if (N < 1 || std::gcd(D, N) != 1)
        throw std::invalid_argument("least_degree: bad level");
    auto factors = factorize(N);
    LeastDegree out;
    for (auto const & it : index.items()) {
        if (out.degree != 0 && it.h >= out.degree)
            continue; // degree >= h(o) could not improve
        if (!splits(D, it.delta_K))
            continue;
        i64 d = least_degree_order(D, N, it.delta, cache);
        if (out.degree == 0 || d < out.degree) {
            out.degree = d;
            out.witness_delta = it.delta;
            if (d == 2)
                break; // no Shimura curve has points of degree 1
        }
    }
    out.conditional = out.degree == 0 || out.degree > index.h_max();
    return out;
}

// Least degree of a CM point on X_1^D(N) from the X_0 value. The covering
// X_1^D(N) -> X_0^D(N) is inert over every CM point except the elliptic
// ones, where Type I / Type II pairs pick up the smaller residual degrees
// phi(N)/6 resp. phi(N)/4 below a degree-2 point.
inline bool is_type_I(i64 D, i64 N)
{
    if (!splits(D, -3) || ord_p(N, 3) > 1)
        return false;
    for (auto const & pp : factorize(N))
        if (pp.prime % 3 == 2)
            return false;
    return true;
}

inline bool is_type_II(i64 D, i64 N)
{
    if (!splits(D, -4) || ord_p(N, 2) > 1)
        return false;
    for (auto const & pp : factorize(N))
        if (pp.prime % 4 == 3)
            return false;
    return true;
}

inline i64 x1_least_degree(i64 D, i64 N, i64 d_cm_x0)
{
    validate_quaternion_disc(D);
    if (N < 1 || std::gcd(D, N) != 1)
        throw std::invalid_argument("x1_least_degree: bad level");
    if (N <= 3)
        return d_cm_x0; // the covering is trivial on points here
    if (is_type_I(D, N))
        return euler_phi(N) / 3;
    if (is_type_II(D, N))
        return euler_phi(N) / 2;
    return checked_mul(euler_phi(N) / 2, d_cm_x0);
}

} // namespace shimcm

#endif
