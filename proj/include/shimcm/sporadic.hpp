#ifndef SHIMCM_SPORADIC_HPP
#define SHIMCM_SPORADIC_HPP

#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "arith.hpp"
#include "cm_locus.hpp"
#include "orders.hpp"
#include "shimura.hpp"

// The sporadic-point pipeline: Heegner-hypothesis discriminant search, the
// analytic degree and genus bounds, the two decision inequalities, the
// published pair tables as data, and the three-way classification of each
// (D, N).

namespace shimcm {

// An imaginary quadratic discriminant satisfies the (D,N) Heegner
// hypothesis when it is inert at every prime of D and split at every prime
// of N.
inline bool satisfies_heegner_hypothesis(i64 delta, i64 D, i64 N)
{
    for (auto const & pp : factorize(D))
        if (kronecker(delta, pp.prime) != -1)
            return false;
    for (auto const & pp : factorize(N))
        if (kronecker(delta, pp.prime) != 1)
            return false;
    return true;
}

struct HeegnerWitness {
    i64 delta_K;
    i64 h_K;
};

// Fundamental discriminant of smallest |delta| with class number within the
// index cap satisfying the (D,N) Heegner hypothesis; absent if none exists
// within the table bound.
inline std::optional<HeegnerWitness> heegner_search(i64 D, i64 N,
                                                    OrderScanIndex const & index)
{
    validate_quaternion_disc(D);
    if (N < 1 || std::gcd(D, N) != 1)
        throw std::invalid_argument("heegner_search: bad level");
    auto fD = factorize(D), fN = factorize(N);
    for (auto const & it : index.items()) {
        if (it.f != 1)
            continue;
        bool ok = true;
        for (auto const & pp : fD)
            if (kronecker(it.delta, pp.prime) != -1) {
                ok = false;
                break;
            }
        if (ok)
            for (auto const & pp : fN)
                if (kronecker(it.delta, pp.prime) != 1) {
                    ok = false;
                    break;
                }
        if (ok)
            return HeegnerWitness{it.delta, it.h};
    }
    return std::nullopt;
}

// The constructive discriminant d0 = L - 16DN of the explicit degree bound:
// L is the least positive integer that is a non-residue at the odd primes of
// D, a residue at the odd primes of N, and 5 mod 8 when 2 | D, 1 mod 8
// otherwise. Then 0 < L < 8DN and d0 satisfies the Heegner hypothesis.
inline i64 bounded_heegner_discriminant(i64 D, i64 N)
{
    validate_quaternion_disc(D);
    if (N < 1 || std::gcd(D, N) != 1)
        throw std::invalid_argument("bounded_heegner_discriminant: bad level");
    i64 start = D % 2 == 0 ? 5 : 1;
    auto fD = factorize(D), fN = factorize(N);
    for (i64 L = start;; L += 8) {
        bool ok = true;
        for (auto const & pp : fD)
            if (pp.prime != 2 && kronecker(L, pp.prime) != -1) {
                ok = false;
                break;
            }
        if (ok)
            for (auto const & pp : fN)
                if (pp.prime != 2 && kronecker(L, pp.prime) != 1) {
                    ok = false;
                    break;
                }
        if (ok) {
            if (L >= 8 * D * N)
                throw std::logic_error("bounded_heegner_discriminant: search left (0, 8DN)");
            return L - 16 * D * N;
        }
    }
}

// d_CM(X_0^D(N)) <= (4e/pi) sqrt(DN) log(16DN)
inline long double degree_upper_bound(i64 D, i64 N)
{
    long double x = static_cast<long double>(D) * static_cast<long double>(N);
    constexpr long double pi = 3.14159265358979323846264338327950288L;
    return 4.0L * std::exp(1.0L) / pi * std::sqrt(x) * std::log(16.0L * x);
}

// g(X_0^D(N)) - 1 > DN/12 * 1/(e^gamma loglog(DN) + 3/loglog 6) - 7 sqrt(DN)/3
inline long double genus_lower_bound(i64 D, i64 N)
{
    if (D * N < 6)
        throw std::invalid_argument("genus_lower_bound: DN must be >= 6");
    long double x = static_cast<long double>(D) * static_cast<long double>(N);
    long double eg = std::exp(0.57721566490153286060651209008240243L);
    long double denom = eg * std::log(std::log(x)) + 3.0L / std::log(std::log(6.0L));
    return x / 12.0L / denom - 7.0L * std::sqrt(x) / 3.0L;
}

// The closing inequality of the pipeline: degree upper bound against 21/400
// of the genus lower bound, as a function of DN alone. Holds from roughly
// DN = 5.6e10 upward.
inline bool global_threshold_inequality(long double dn)
{
    long double eg = std::exp(0.57721566490153286060651209008240243L);
    constexpr long double pi = 3.14159265358979323846264338327950288L;
    long double lhs = 4.0L * std::exp(1.0L) / pi * std::sqrt(dn) *
                      std::log(16.0L * dn);
    long double denom = eg * std::log(std::log(dn)) + 3.0L / std::log(std::log(6.0L));
    long double rhs = 7.0L * dn / 1600.0L / denom -
                      49.0L * std::sqrt(dn) / 400.0L;
    return lhs <= rhs;
}

// h_K < 7 phi(D) psi(N)/3200 - 49 sqrt(DN)/800
inline bool inequality_heegner(i64 D, i64 N, i64 h_K)
{
    long double rhs = 7.0L * euler_phi(D) * dedekind_psi(N) / 3200.0L -
                      49.0L * std::sqrt(static_cast<long double>(D) *
                                        static_cast<long double>(N)) / 800.0L;
    return static_cast<long double>(h_K) < rhs;
}

inline long double inequality_heegner_rhs(i64 D, i64 N)
{
    return 7.0L * euler_phi(D) * dedekind_psi(N) / 3200.0L -
           49.0L * std::sqrt(static_cast<long double>(D) *
                             static_cast<long double>(N)) / 800.0L;
}

// d_CM(X_0^D(N)) < (21/400)(phi(D)psi(N)/12 - e1/4 - e3/3), i.e. 21/400 of
// g - 1. Evaluated in exact integer arithmetic: 4800 d < 21 (phi psi - 3 e1
// - 4 e3).
inline bool inequality_dcm(i64 D, i64 N, i64 d_cm)
{
    auto [e1, e3] = elliptic_counts(D, N);
    i64 rhs = checked_mul(21, checked_add(checked_mul(euler_phi(D), dedekind_psi(N)),
                                          -checked_add(checked_mul(3, e1),
                                                       checked_mul(4, e3))));
    return checked_mul(4800, d_cm) < rhs;
}

struct PairTable {
    std::vector<std::pair<i64, i64>> pairs;
    std::set<std::pair<i64, i64>> index;

    bool contains(i64 D, i64 N) const { return index.count({D, N}) != 0; }
    std::size_t size() const { return pairs.size(); }
};

// The published pair lists, shipped as versioned text files with a count
// manifest. Table 3 is printed with one duplicated row; the loader drops
// duplicates and reports them.
struct KnownTables {
    PairTable table1;      // 227 pairs: sporadic via a degree-2 CM point
    PairTable table2;      // 64 pairs: delta(X) = 2, no sporadic points
    PairTable table3;      // 391 pairs: undetermined
    PairTable f1;          // 20 pairs where the Heegner search is empty
    PairTable genus0;      // 3 pairs of genus 0
    PairTable genus1;      // 11 pairs of genus 1
    PairTable hyperelliptic;
    std::vector<i64> bielliptic; // discriminants D, level 1
    std::vector<std::string> warnings;

    static KnownTables load(std::string const & dir);
};

namespace detail {

inline PairTable load_pairs(std::string const & path,
                            std::vector<std::string> & warnings)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot read table file " + path);
    PairTable t;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#')
            continue;
        auto comma = line.find(',');
        if (comma == std::string::npos)
            throw std::runtime_error("bad pair line in " + path + ": " + line);
        i64 D = std::stoll(line.substr(0, comma));
        i64 N = std::stoll(line.substr(comma + 1));
        if (!t.index.insert({D, N}).second) {
            warnings.push_back("duplicate pair (" + std::to_string(D) + "," +
                               std::to_string(N) + ") in " + path + ", dropped");
            continue;
        }
        t.pairs.push_back({D, N});
    }
    return t;
}

inline std::map<std::string, i64> load_manifest(std::string const & path)
{
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("cannot read manifest " + path);
    std::map<std::string, i64> m;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#')
            continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::runtime_error("bad manifest line: " + line);
        m[line.substr(0, eq)] = std::stoll(line.substr(eq + 1));
    }
    return m;
}

} // namespace detail

inline KnownTables KnownTables::load(std::string const & dir)
{
    KnownTables kt;
    auto manifest = detail::load_manifest(dir + "/manifest.txt");
    auto check = [&](PairTable const & t, std::string const & name) {
        auto want = manifest.find(name);
        if (want == manifest.end())
            throw std::runtime_error("manifest missing count for " + name);
        if (static_cast<i64>(t.size()) != want->second)
            throw std::runtime_error(name + ": expected " +
                                     std::to_string(want->second) + " pairs, got " +
                                     std::to_string(t.size()));
    };
    kt.table1 = detail::load_pairs(dir + "/table1.txt", kt.warnings);
    kt.table2 = detail::load_pairs(dir + "/table2.txt", kt.warnings);
    kt.table3 = detail::load_pairs(dir + "/table3.txt", kt.warnings);
    kt.f1 = detail::load_pairs(dir + "/f1.txt", kt.warnings);
    kt.genus0 = detail::load_pairs(dir + "/genus0.txt", kt.warnings);
    kt.genus1 = detail::load_pairs(dir + "/genus1.txt", kt.warnings);
    kt.hyperelliptic = detail::load_pairs(dir + "/hyperelliptic.txt", kt.warnings);
    check(kt.table1, "table1");
    check(kt.table2, "table2");
    check(kt.table3, "table3");
    check(kt.f1, "f1");
    check(kt.genus0, "genus0");
    check(kt.genus1, "genus1");
    check(kt.hyperelliptic, "hyperelliptic");
    {
        std::ifstream in(dir + "/bielliptic.txt");
        if (!in)
            throw std::runtime_error("cannot read " + dir + "/bielliptic.txt");
        std::string line;
        while (std::getline(in, line))
            if (!line.empty() && line[0] != '#')
                kt.bielliptic.push_back(std::stoll(line));
        auto want = manifest.at("bielliptic");
        if (static_cast<i64>(kt.bielliptic.size()) != want)
            throw std::runtime_error("bielliptic: bad count");
    }
    for (auto const & [D, N] : kt.table1.pairs)
        if (kt.table2.contains(D, N))
            throw std::runtime_error("table1 and table2 are not disjoint");
    for (auto const * t : {&kt.table1, &kt.table2, &kt.table3, &kt.f1})
        for (auto const & [D, N] : t->pairs)
            if (!is_quaternion_disc(D) || N < 1 || std::gcd(D, N) != 1)
                throw std::runtime_error("invalid pair in table data");
    return kt;
}

enum class Verdict { no_sporadic, sporadic_cm, unknown };

inline char const * to_string(Verdict v)
{
    switch (v) {
    case Verdict::no_sporadic:
        return "no_sporadic";
    case Verdict::sporadic_cm:
        return "sporadic_cm";
    case Verdict::unknown:
        return "unknown";
    }
    return "?";
}

struct SporadicVerdict {
    i64 D = 0, N = 0;
    Verdict verdict = Verdict::unknown;
    std::string rule; // which rule fired
    i64 d_cm = 0;
    i64 witness_delta = 0;
    bool d_conditional = false;
    i64 genus = 0;
    double dcm_rhs = 0; // (21/400)(g - 1)
    std::optional<HeegnerWitness> heegner;
    double heegner_rhs = 0;
};

// Three-way classification of (D, N), preferring the exact least degree:
// no_sporadic on the delta(X) = 2 list; sporadic when the exact-degree
// inequality holds, the pair carries a known degree-2 sporadic point, or a
// Heegner discriminant beats its class-number bound; unknown otherwise.
inline SporadicVerdict classify(i64 D, i64 N, OrderScanIndex const & index,
                                ClassNumberCache & cache, KnownTables const & tables)
{
    validate_quaternion_disc(D);
    if (N < 1 || std::gcd(D, N) != 1)
        throw std::invalid_argument("classify: bad level");

    SporadicVerdict out;
    out.D = D;
    out.N = N;
    out.genus = genus(D, N);
    out.dcm_rhs = 21.0 * (static_cast<double>(out.genus) - 1.0) / 400.0;

    auto ld = least_degree(D, N, index, cache);
    out.d_cm = ld.degree;
    out.witness_delta = ld.witness_delta;
    out.d_conditional = ld.conditional;

    if (tables.table2.contains(D, N)) {
        out.verdict = Verdict::no_sporadic;
        out.rule = "table2";
        return out;
    }
    if (!ld.conditional && inequality_dcm(D, N, ld.degree)) {
        out.verdict = Verdict::sporadic_cm;
        out.rule = "dcm_inequality";
        return out;
    }
    if (tables.table1.contains(D, N)) {
        out.verdict = Verdict::sporadic_cm;
        out.rule = "table1";
        return out;
    }
    out.heegner = heegner_search(D, N, index);
    out.heegner_rhs = static_cast<double>(inequality_heegner_rhs(D, N));
    if (out.heegner && inequality_heegner(D, N, out.heegner->h_K)) {
        out.verdict = Verdict::sporadic_cm;
        out.rule = "heegner";
        return out;
    }
    out.verdict = Verdict::unknown;
    out.rule = "none";
    return out;
}

// All valid coprime pairs with DN <= dn_max, ordered by D then N.
inline std::vector<std::pair<i64, i64>> valid_pairs_up_to(i64 dn_max)
{
    std::vector<std::pair<i64, i64>> out;
    for (i64 D = 6; D <= dn_max; D++) {
        if (!is_quaternion_disc(D))
            continue;
        for (i64 N = 1; D * N <= dn_max; N++)
            if (std::gcd(D, N) == 1)
                out.push_back({D, N});
    }
    return out;
}

} // namespace shimcm

#endif
