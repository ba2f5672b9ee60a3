#include <catch2/catch_amalgamated.hpp>

#include "shimcm/cm_locus.hpp"
#include "shimcm/volcano.hpp"

#include <map>

using namespace shimcm;

namespace {

i64 tau(i64 delta_K, i64 f0, i64 ell, int lvl)
{
    return pic_two_torsion(checked_mul(checked_pow(ell, 2 * lvl), f0 * f0 * delta_K));
}

int fixed_children(MarkedComponent const & mc, int v)
{
    int n = 0;
    for (int c : mc.children(v))
        if (mc.is_fixed(c))
            n++;
    return n;
}

// Instances covering every marking case: each ell <= 7 meets inert, split
// and ramified fundamental discriminants, and ell = 2 meets both odd
// residues mod 8 and both even classes mod 16, with conductors f0 > 1 mixed
// in. Surfaces at -3 and -4 carry no involution and are excluded.
std::vector<VolcanoSpec> marking_grid(int depth)
{
    std::vector<VolcanoSpec> specs;
    std::vector<i64> fundamentals = {-3,  -4,  -7,  -8,  -11, -15, -19,
                                     -20, -23, -24, -35, -39, -40, -43,
                                     -51, -52, -55, -56, -84, -88, -120};
    for (i64 ell : {2, 3, 5, 7})
        for (i64 dK : fundamentals)
            for (i64 f0 : {1, 2, 3, 5}) {
                if (f0 % ell == 0)
                    continue;
                if (f0 * f0 * dK >= -4)
                    continue;
                specs.push_back({ell, dK, f0, depth, true});
            }
    return specs;
}

} // namespace

TEST_CASE("odd unramified marking pattern")
{
    // ell = 3 inert in Q(sqrt(-19)); involution anchored at level 2
    MarkedComponent mc({3, -19, 1, 2, true});
    REQUIRE(mc.fixed_count(0) == 1);
    REQUIRE(mc.fixed_count(1) == 2);
    REQUIRE(mc.fixed_count(2) == 2);
    for (int v : mc.level(0))
        if (mc.is_fixed(v))
            CHECK(fixed_children(mc, v) == 2);
    for (int v : mc.level(1))
        if (mc.is_fixed(v))
            CHECK(fixed_children(mc, v) == 1);
}

TEST_CASE("delta_K = -8 marking pattern at ell = 2")
{
    MarkedComponent mc({2, -8, 1, 3, true});
    REQUIRE(mc.shape() == SurfaceShape::ramified_loop);
    REQUIRE(mc.level(0).size() == 1);
    REQUIRE(mc.fixed_count(1) == 2); // both level-1 vertices
    for (int lvl : {2, 3}) {
        REQUIRE(mc.fixed_count(lvl) == 2);
        // the two fixed vertices share a parent one level up
        std::vector<int> fixed;
        for (int v : mc.level(lvl))
            if (mc.is_fixed(v))
                fixed.push_back(v);
        REQUIRE(mc.parent(fixed[0]) == mc.parent(fixed[1]));
    }
}

TEST_CASE("free split surface is a cycle with no fixed vertices")
{
    MarkedComponent mc({5, -19, 1, 1, false});
    REQUIRE(mc.shape() == SurfaceShape::cycle);
    for (int v : mc.level(0)) {
        CHECK_FALSE(mc.is_fixed(v));
        CHECK(mc.cycle_next(v) >= 0);
        CHECK(mc.cycle_prev(v) >= 0);
    }
}

TEST_CASE("surface and subsurface degrees")
{
    for (auto spec : {VolcanoSpec{3, -19, 1, 3, false}, {5, -19, 1, 2, false},
                      {2, -15, 1, 3, false}, {3, -20, 2, 2, false},
                      {7, -24, 1, 2, false}}) {
        MarkedComponent mc(spec);
        i64 ell = spec.ell;
        int chi = mc.chi();
        for (int k = 0; k + 1 < mc.num_levels(); k++)
            for (int v : mc.level(k)) {
                if (k == 0) {
                    REQUIRE(static_cast<i64>(mc.children(v).size()) *
                                mc.edge_multiplicity() ==
                            ell - chi);
                } else {
                    REQUIRE(static_cast<i64>(mc.children(v).size()) == ell);
                }
            }
    }
}

TEST_CASE("sigma is a level-preserving involution matching the marks")
{
    for (auto const & spec : marking_grid(4)) {
        MarkedComponent mc(spec);
        for (int k = 0; k < mc.num_levels(); k++)
            for (int v : mc.level(k)) {
                int w = mc.sigma(v);
                REQUIRE(mc.level_of(w) == k);
                REQUIRE(mc.sigma(w) == v);
                REQUIRE((w == v) == mc.is_fixed(v));
                if (k > 0)
                    REQUIRE(mc.sigma(mc.parent(v)) == mc.parent(w));
            }
    }
}

TEST_CASE("fixed vertex counts match the two-torsion numbers")
{
    // Proposition 5.2 against the lemma-by-lemma marking, every case with
    // ell <= 7 and depth <= 4
    for (int depth = 0; depth <= 4; depth++)
        for (auto const & spec : marking_grid(depth)) {
            MarkedComponent mc(spec);
            for (int lvl = 0; lvl <= depth; lvl++) {
                INFO("ell=" << spec.ell << " dK=" << spec.delta_K
                            << " f0=" << spec.f0 << " depth=" << depth
                            << " level=" << lvl);
                REQUIRE(mc.fixed_count(lvl) == tau(spec.delta_K, spec.f0, spec.ell, lvl));
            }
        }
}

TEST_CASE("fixed_vertex_count applies the 2^b factor and the free case")
{
    CHECK(fixed_vertex_count(6, -24, 5, 1, 0) == 2);
    CHECK(fixed_vertex_count(6, -24, 5, 1, 1) == 4);
    CHECK(fixed_vertex_count(6, -19, 5, 1, 1) == 0); // D(K) = 6: free action
    CHECK(fixed_vertex_count(10, -40, 3, 1, 1) == pic_two_torsion(-360));
}

TEST_CASE("volcano rejects impossible specs")
{
    CHECK_THROWS_AS(MarkedComponent({4, -19, 1, 1, false}), std::invalid_argument);
    CHECK_THROWS_AS(MarkedComponent({3, -20, 3, 1, false}), std::invalid_argument);
    CHECK_THROWS_AS(MarkedComponent({3, -12, 1, 1, false}), std::invalid_argument);
    // no involution marking over a -3 or -4 surface
    CHECK_THROWS_AS(MarkedComponent({5, -3, 1, 1, true}), std::invalid_argument);
    CHECK_THROWS_AS(MarkedComponent({5, -4, 1, 1, true}), std::invalid_argument);
}

TEST_CASE("path tallies at the surface")
{
    MarkedComponent split({5, -19, 1, 1, false});
    auto t = enumerate_paths(split, 1, 0);
    CHECK(t[{0, 1, 0}].count == 2);
    CHECK(t[{0, 0, 1}].count == 4);

    MarkedComponent inert({3, -19, 1, 2, false});
    auto t2 = enumerate_paths(inert, 2, 0);
    CHECK(t2[{0, 0, 2}].count == 12);
    CHECK(t2.size() == 1);

    auto empty = enumerate_paths(inert, 0, 0);
    CHECK(empty.size() == 1);
    CHECK(empty[{0, 0, 0}].count == 1);

    CHECK_THROWS_AS(enumerate_paths(inert, 3, 0), std::invalid_argument);
}

TEST_CASE("parallel edge conventions over -3 and -4 surfaces")
{
    MarkedComponent m4({2, -4, 1, 3, false});
    REQUIRE(m4.shape() == SurfaceShape::ramified_loop);
    REQUIRE(m4.edge_multiplicity() == 2);
    auto t = enumerate_paths(m4, 1, 0);
    CHECK(t[{0, 0, 1}].count == 2); // the two parallel copies
    CHECK(t[{0, 1, 0}].count == 1); // the self-loop
    // ascend from level 1, then return through the other parallel edge
    auto t1 = enumerate_paths(m4, 2, 1);
    CHECK(t1[{1, 0, 1}].count == 1);
    CHECK(t1[{1, 1, 0}].count == 1);
    CHECK(t1[{0, 0, 2}].count == 4);

    MarkedComponent m3({3, -3, 1, 2, false});
    REQUIRE(m3.edge_multiplicity() == 3);
    auto t3 = enumerate_paths(m3, 2, 0);
    CHECK(t3[{0, 0, 2}].count == 9);
    CHECK(t3[{0, 1, 1}].count == 3);
}

// The independent structural oracle against the closed-form class tables:
// the number of length-a paths from a vertex at level L with maximal level
// m equals (sum of count * e * rel)/2^b over the classes whose residue
// field has ell-conductor-order m.
TEST_CASE("path tallies match the class tables")
{
    struct Case {
        i64 D, ell, delta;
        int a;
    };
    std::vector<Case> cases;
    for (i64 D : {6, 10, 15, 21, 26})
        for (i64 ell : {2, 3, 5})
            for (i64 delta : {-3, -4, -7, -15, -16, -19, -20, -24, -36, -40, -48,
                              -51, -52, -60, -63, -75, -99, -100, -112, -147,
                              -171, -180, -240, -300})
                for (int a : {1, 2, 3})
                    if (D % ell != 0 && splits(D, decompose_discriminant(delta).first))
                        cases.push_back({D, ell, delta, a});

    ClassNumberCache cache;
    for (auto const & c : cases) {
        INFO("D=" << c.D << " ell=" << c.ell << " delta=" << c.delta
                  << " a=" << c.a);
        auto [dK, f] = decompose_discriminant(c.delta);
        int L = ord_p(f, c.ell);
        i64 f0 = f / checked_pow(c.ell, L);
        auto fd = fiber_prime_power(c.D, c.ell, c.a, c.delta, cache);

        // expected per-start-vertex path counts, keyed by the residue field
        // reached (the maximal level along the path sets its conductor)
        std::map<i64, i64> expected;
        for (auto const & cl : fd.classes)
            expected[cl.field.conductor] += cl.count * cl.e * cl.rel_degree;
        bool marked = fd.DK == 1;
        MarkedComponent mc({c.ell, dK, f0, L + c.a, marked});
        std::map<i64, i64> got;
        for (auto const & [t, tally] : enumerate_paths(mc, c.a, L)) {
            int m = std::max(L, L - t.ascend + t.descend);
            i64 cond = detail::canonical_conductor(
                dK, checked_mul(checked_pow(c.ell, m), f0));
            got[cond] += tally.count;
        }
        for (auto & [m, n] : expected) {
            REQUIRE(n % (i64{1} << fd.b) == 0);
            n /= i64{1} << fd.b;
        }
        REQUIRE(got == expected);
    }
}
