#ifndef SHIMCM_ORDERS_HPP
#define SHIMCM_ORDERS_HPP

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "arith.hpp"

// Imaginary quadratic orders: conductor decomposition, class numbers by two
// independent routes (reduced-form count and the relative class number
// formula), class-group 2-torsion, and a batch table of all orders down to a
// discriminant bound.

namespace shimcm {

inline bool is_imaginary_quadratic_discriminant(i64 delta)
{
    if (delta >= 0)
        return false;
    i64 r = ((delta % 4) + 4) % 4;
    return r == 0 || r == 1;
}

inline void require_discriminant(i64 delta)
{
    if (!is_imaginary_quadratic_discriminant(delta))
        throw std::invalid_argument(
            "not an imaginary quadratic discriminant: " + std::to_string(delta));
}

inline bool is_fundamental_discriminant(i64 delta)
{
    if (!is_imaginary_quadratic_discriminant(delta))
        return false;
    i64 r = ((delta % 4) + 4) % 4;
    if (r == 1)
        return is_squarefree(-delta);
    i64 m = delta / 4;
    i64 rm = ((m % 4) + 4) % 4;
    return (rm == 2 || rm == 3) && is_squarefree(-m);
}

// delta = f^2 * delta_K with delta_K fundamental.
inline std::pair<i64, i64> decompose_discriminant(i64 delta)
{
    require_discriminant(delta);
    // pull the full square part out of |delta|
    i64 s = 1, m = -1;
    for (auto const & pp : factorize(-delta)) {
        s = checked_mul(s, checked_pow(pp.prime, pp.exponent / 2));
        if (pp.exponent % 2)
            m = checked_mul(m, pp.prime);
    }
    i64 rm = ((m % 4) + 4) % 4;
    if (rm == 1)
        return {m, s};
    // here s is even, else delta = 2,3 (mod 4)
    return {4 * m, s / 2};
}

inline i64 conductor_of(i64 delta) { return decompose_discriminant(delta).second; }

// Number of SL2(Z)-reduced primitive forms (a,b,c) of discriminant delta:
// b^2 - 4ac = delta, |b| <= a <= c, gcd(a,b,c) = 1, and b >= 0 whenever
// |b| = a or a = c. Independent oracle for the class number.
inline i64 class_number_forms(i64 delta)
{
    require_discriminant(delta);
    i64 h = 0;
    for (i64 a = 1; 3 * a * a <= -delta; a++) {
        for (i64 b = -(a - 1); b <= a; b++) {
            i64 num = b * b - delta;
            if (num % (4 * a))
                continue;
            i64 c = num / (4 * a);
            if (c < a)
                continue;
            if (c == a && b < 0)
                continue;
            if (std::gcd(std::gcd(a, b), c) != 1)
                continue;
            h++;
        }
    }
    return h;
}

// Count of ambiguous reduced forms (b = 0, a = b, or a = c); equals
// #Pic(o_delta)[2]. Oracle for pic_two_torsion.
inline i64 ambiguous_form_count(i64 delta)
{
    require_discriminant(delta);
    i64 t = 0;
    for (i64 a = 1; 3 * a * a <= -delta; a++) {
        for (i64 b = 0; b <= a; b++) {
            i64 num = b * b - delta;
            if (num % (4 * a))
                continue;
            i64 c = num / (4 * a);
            if (c < a)
                continue;
            if (std::gcd(std::gcd(a, b), c) != 1)
                continue;
            if (b == 0 || b == a || a == c)
                t++;
        }
    }
    return t;
}

// [o_K^* : o(f)^*]: 3 for delta_K = -3 and f > 1, 2 for delta_K = -4 and
// f > 1, else 1.
inline i64 unit_index(i64 delta_K, i64 f)
{
    if (f == 1)
        return 1;
    if (delta_K == -3)
        return 3;
    if (delta_K == -4)
        return 2;
    return 1;
}

// h(o(f)) = h_K * f / [o_K^*:o(f)^*] * prod_{p | f} (1 - (delta_K/p)/p),
// given the fundamental class number h_K.
inline i64 class_number_from_fundamental(i64 delta_K, i64 f, i64 h_K)
{
    i64 h = h_K;
    for (auto const & pp : factorize(f)) {
        h = checked_mul(h, checked_pow(pp.prime, pp.exponent - 1));
        h = checked_mul(h, pp.prime - kronecker(delta_K, pp.prime));
    }
    i64 u = unit_index(delta_K, f);
    if (h % u)
        throw std::logic_error("class_number_from_fundamental: unit index");
    return h / u;
}

// Production class number: relative formula on top of a form count for the
// fundamental part.
inline i64 class_number_formula(i64 delta)
{
    auto [delta_K, f] = decompose_discriminant(delta);
    return class_number_from_fundamental(delta_K, f, class_number_forms(delta_K));
}

// #Pic(o_delta)[2] = 2^mu with mu read off delta mod 16 / 32 and the number
// r of distinct odd primes dividing delta.
inline i64 pic_two_torsion(i64 delta)
{
    require_discriminant(delta);
    int r = 0;
    for (auto const & pp : factorize(-delta))
        if (pp.prime != 2)
            r++;
    i64 m16 = ((delta % 16) + 16) % 16;
    i64 m32 = ((delta % 32) + 32) % 32;
    int mu;
    if (m16 % 4 == 1 || m16 == 4)
        mu = r - 1;
    else if (m16 == 8 || m16 == 12 || m32 == 16)
        mu = r;
    else // delta = 0 (mod 32)
        mu = r + 1;
    if (mu < 0)
        mu = 0; // delta = 1 (mod 4) squarefree with r = 0 cannot occur; guard anyway
    return i64{1} << mu;
}

// Complete class-number data for every discriminant 0 > delta >= -bound,
// built by one sweep over reduced forms rather than per-discriminant calls.
class OrderTable {
  public:
    struct Entry {
        std::uint32_t h;
        std::uint32_t t2;
    };

    static constexpr i64 kMaxBound = 64'000'000; // memory guard (~384 MB)

    explicit OrderTable(i64 bound) : bound_(bound)
    {
        if (bound < 4)
            throw std::invalid_argument("OrderTable: bound must be >= 4");
        if (bound > kMaxBound)
            throw std::length_error("OrderTable: bound exceeds configured ceiling");
        h_.assign(static_cast<std::size_t>(bound) + 1, 0);
        amb_.assign(static_cast<std::size_t>(bound) + 1, 0);
        sweep();
    }

    i64 bound() const { return bound_; }

    bool contains(i64 delta) const
    {
        return is_imaginary_quadratic_discriminant(delta) && -delta <= bound_;
    }

    i64 h(i64 delta) const { return h_[check(delta)]; }
    i64 t2(i64 delta) const { return amb_[check(delta)]; }

    Entry entry(i64 delta) const
    {
        auto i = check(delta);
        return {h_[i], static_cast<std::uint32_t>(amb_[i])};
    }

    // all discriminants with h <= h_max, ascending |delta|
    std::vector<i64> discriminants_with_class_number_up_to(i64 h_max) const
    {
        std::vector<i64> out;
        for (i64 d = 3; d <= bound_; d++) {
            i64 m = d % 4;
            if (m != 0 && m != 3)
                continue;
            if (h_[static_cast<std::size_t>(d)] <= h_max)
                out.push_back(-d);
        }
        return out;
    }

    // Text format: "#bound=X" header, then one "delta,h,t2" line per
    // discriminant in ascending |delta|. Round-trips bit-exactly.
    void save(std::string const & path) const
    {
        std::ofstream out(path, std::ios::binary);
        if (!out)
            throw std::runtime_error("OrderTable: cannot write " + path);
        out << "#bound=" << bound_ << "\n";
        for (i64 d = 3; d <= bound_; d++) {
            i64 m = d % 4;
            if (m != 0 && m != 3)
                continue;
            auto i = static_cast<std::size_t>(d);
            out << -d << ',' << h_[i] << ',' << amb_[i] << '\n';
        }
        if (!out)
            throw std::runtime_error("OrderTable: write failed: " + path);
    }

    static OrderTable load(std::string const & path)
    {
        std::ifstream in(path, std::ios::binary);
        if (!in)
            throw std::runtime_error("OrderTable: cannot read " + path);
        std::string header;
        std::getline(in, header);
        if (header.rfind("#bound=", 0) != 0)
            throw std::runtime_error("OrderTable: bad header in " + path);
        OrderTable t(Raw{}, std::stoll(header.substr(7)));
        std::string line;
        while (std::getline(in, line)) {
            if (line.empty())
                continue;
            auto c1 = line.find(',');
            auto c2 = line.find(',', c1 + 1);
            if (c1 == std::string::npos || c2 == std::string::npos)
                throw std::runtime_error("OrderTable: bad line in " + path);
            i64 delta = std::stoll(line.substr(0, c1));
            auto i = static_cast<std::size_t>(-delta);
            if (delta >= 0 || -delta > t.bound_)
                throw std::runtime_error("OrderTable: entry out of range in " + path);
            t.h_[i] = static_cast<std::uint32_t>(std::stoul(line.substr(c1 + 1, c2 - c1 - 1)));
            t.amb_[i] = static_cast<std::uint16_t>(std::stoul(line.substr(c2 + 1)));
        }
        return t;
    }

  private:
    struct Raw {};
    OrderTable(Raw, i64 bound) : bound_(bound)
    {
        if (bound < 4 || bound > kMaxBound)
            throw std::runtime_error("OrderTable: bad bound on load");
        h_.assign(static_cast<std::size_t>(bound) + 1, 0);
        amb_.assign(static_cast<std::size_t>(bound) + 1, 0);
    }

    std::size_t check(i64 delta) const
    {
        require_discriminant(delta);
        if (-delta > bound_)
            throw std::out_of_range("OrderTable: |delta| exceeds bound");
        return static_cast<std::size_t>(-delta);
    }

    // One pass over reduced forms (a,b,c): forms with 0 < b < a < c count for
    // +-b, the ambiguous shapes (b=0, b=a, a=c) once.
    void sweep()
    {
        i64 const X = bound_;
        for (i64 a = 1; 3 * a * a <= X; a++) {
            for (i64 b = 0; b <= a; b++) {
                i64 g = std::gcd(a, b);
                // c from a upward while |delta| = 4ac - b^2 <= X
                i64 c_max = (X + b * b) / (4 * a);
                for (i64 c = a; c <= c_max; c++) {
                    if (g != 1 && std::gcd(g, c) != 1)
                        continue;
                    auto i = static_cast<std::size_t>(4 * a * c - b * b);
                    bool ambiguous = (b == 0) || (b == a) || (a == c);
                    h_[i] += ambiguous ? 1 : 2;
                    if (ambiguous)
                        amb_[i]++;
                }
            }
        }
    }

    i64 bound_;
    std::vector<std::uint32_t> h_;
    std::vector<std::uint16_t> amb_;
};

// Cached table reuse: load `orders_<bound>.tbl` from the cache directory if
// present, else build and persist it. A cold and a warm call return
// identical tables.
inline OrderTable load_or_build_order_table(i64 bound, std::string const & cache_dir)
{
    namespace fs = std::filesystem;
    fs::path path = fs::path(cache_dir) / ("orders_" + std::to_string(bound) + ".tbl");
    if (fs::exists(path))
        return OrderTable::load(path.string());
    OrderTable t(bound);
    std::error_code ec;
    fs::create_directories(cache_dir, ec);
    if (ec)
        throw std::runtime_error("cannot create cache directory " + cache_dir);
    t.save(path.string());
    return t;
}

// Small memoising wrapper used by the fiber machinery: class numbers keyed by
// discriminant, fundamental part resolved through the relative formula.
class ClassNumberCache {
  public:
    i64 h(i64 delta)
    {
        auto it = memo_.find(delta);
        if (it != memo_.end())
            return it->second;
        auto [delta_K, f] = decompose_discriminant(delta);
        i64 hK;
        auto itK = memo_.find(delta_K);
        if (itK != memo_.end())
            hK = itK->second;
        else {
            hK = class_number_forms(delta_K);
            memo_.emplace(delta_K, hK);
        }
        i64 value = class_number_from_fundamental(delta_K, f, hK);
        memo_.emplace(delta, value);
        return value;
    }

  private:
    std::unordered_map<i64, i64> memo_;
};

} // namespace shimcm

#endif
