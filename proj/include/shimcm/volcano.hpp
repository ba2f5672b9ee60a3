#ifndef SHIMCM_VOLCANO_HPP
#define SHIMCM_VOLCANO_HPP

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "arith.hpp"
#include "orders.hpp"
#include "shimura.hpp"

// Structural model of the QM-equivariant ell-isogeny graph components: the
// leveled volcano truncated at a finite depth, the surface arrangement, and
// the explicit involution marking in the D(K) = 1 situation. Components are
// built purely from the structure theory (level sizes, degrees, marking
// rules); they never touch ideal arithmetic. This module is the independent
// oracle for the closed-form class tables in cm_locus.

namespace shimcm {

struct VolcanoSpec {
    i64 ell = 2;
    i64 delta_K = -3; // fundamental
    i64 f0 = 1;       // prime-to-ell part of the central conductor
    int depth = 0;    // materialize levels 0..depth; the involution, if any,
                      // is anchored at a vertex in level `depth`
    bool sigma = false; // involution marking (D(K) = 1) vs free action
};

enum class SurfaceShape {
    isolated,         // ell inert: no horizontal edges
    ramified_loop,    // ell ramified, norm-ell ideal principal: self-loops
    ramified_segment, // ell ramified, non-principal: paired vertices
    cycle             // ell split
};

// Whether ell is represented by the principal form of discriminant delta0;
// decides self-loop vs segment on a ramified surface.
inline bool principal_form_represents(i64 delta0, i64 ell)
{
    i64 ymax = 1;
    while (ymax * ymax * (-delta0) <= 4 * ell)
        ymax++;
    for (i64 y = -ymax; y <= ymax; y++) {
        for (i64 x = -ell - 2; x <= ell + 2; x++) {
            i64 v;
            if (((delta0 % 4) + 4) % 4 == 0)
                v = x * x + (-delta0 / 4) * y * y;
            else
                v = x * x + x * y + ((1 - delta0) / 4) * y * y;
            if (v == ell)
                return true;
        }
    }
    return false;
}

class MarkedComponent {
  public:
    explicit MarkedComponent(VolcanoSpec const & spec) : spec_(spec)
    {
        validate();
        build_levels();
        arrange_surface();
        if (spec_.sigma)
            mark_and_pair();
        else
            sigma_.assign(parent_.size(), -1);
    }

    VolcanoSpec const & spec() const { return spec_; }
    SurfaceShape shape() const { return shape_; }
    int chi() const { return chi_; }
    // number of parallel descending edges per child between levels 0 and 1
    // (3 for the -3 surface, 2 for -4, else 1)
    int edge_multiplicity() const { return mult_; }

    int num_levels() const { return static_cast<int>(levels_.size()); }
    std::vector<int> const & level(int k) const { return levels_.at(k); }
    int level_of(int v) const { return level_of_.at(v); }
    int parent(int v) const { return parent_.at(v); }
    std::vector<int> const & children(int v) const { return children_.at(v); }
    bool is_fixed(int v) const { return fixed_.at(v); }
    // explicit involution realizing the marking; -1 entries in the free case
    int sigma(int v) const { return sigma_.at(v); }

    // horizontal neighbours of a surface vertex, as directed steps
    int cycle_next(int v) const { return h_next_.at(v); }
    int cycle_prev(int v) const { return h_prev_.at(v); }
    int segment_partner(int v) const { return h_partner_.at(v); }

    int fixed_count(int lvl) const
    {
        int n = 0;
        for (int v : levels_.at(lvl))
            if (fixed_[v])
                n++;
        return n;
    }

    int horizontal_degree() const { return 1 + chi_; }

    // first sigma-fixed vertex at a level (marked case), else the first vertex
    int start_vertex(int lvl) const
    {
        for (int v : levels_.at(lvl))
            if (!spec_.sigma || fixed_[v])
                return v;
        throw std::logic_error("no start vertex at level " + std::to_string(lvl));
    }

  private:
    void validate()
    {
        if (!is_prime(spec_.ell))
            throw std::invalid_argument("volcano: ell must be prime");
        if (!is_fundamental_discriminant(spec_.delta_K))
            throw std::invalid_argument("volcano: delta_K must be fundamental");
        if (spec_.f0 < 1 || spec_.f0 % spec_.ell == 0)
            throw std::invalid_argument("volcano: f0 must be positive and prime to ell");
        if (spec_.depth < 0)
            throw std::invalid_argument("volcano: depth must be >= 0");
        delta0_ = checked_mul(spec_.f0 * spec_.f0, spec_.delta_K);
        if (spec_.sigma && delta0_ >= -4)
            throw std::invalid_argument(
                "volcano: no involution marking exists over a -3 or -4 surface "
                "(D(K) = 1 is impossible there)");
        chi_ = kronecker(spec_.delta_K, spec_.ell);
        mult_ = delta0_ == -3 ? 3 : delta0_ == -4 ? 2 : 1;
    }

    void build_levels()
    {
        i64 n0 = class_number_formula(delta0_);
        i64 ell = spec_.ell;
        std::vector<i64> sizes{n0};
        if (spec_.depth >= 1)
            sizes.push_back(n0 * (ell - chi_) / mult_);
        for (int k = 2; k <= spec_.depth; k++)
            sizes.push_back(checked_mul(sizes.back(), ell));
        i64 total = 0;
        for (i64 s : sizes)
            total = checked_add(total, s);
        if (total > 5'000'000)
            throw std::length_error("volcano: component too large to materialize");

        levels_.resize(sizes.size());
        int id = 0;
        for (std::size_t k = 0; k < sizes.size(); k++)
            for (i64 i = 0; i < sizes[k]; i++) {
                levels_[k].push_back(id);
                level_of_.push_back(static_cast<int>(k));
                id++;
            }
        parent_.assign(id, -1);
        children_.assign(id, {});
        fixed_.assign(id, false);

        // attach children: surface vertices get (ell - chi)/mult children,
        // deeper vertices ell each, in level order
        for (std::size_t k = 0; k + 1 < levels_.size(); k++) {
            std::size_t next = 0;
            i64 per = k == 0 ? (ell - chi_) / mult_ : ell;
            for (int v : levels_[k])
                for (i64 c = 0; c < per; c++) {
                    int w = levels_[k + 1][next++];
                    parent_[w] = v;
                    children_[v].push_back(w);
                }
            if (next != levels_[k + 1].size())
                throw std::logic_error("volcano: level size mismatch");
        }
    }

    void arrange_surface()
    {
        int n0 = static_cast<int>(levels_[0].size());
        h_next_.assign(parent_.size(), -1);
        h_prev_.assign(parent_.size(), -1);
        h_partner_.assign(parent_.size(), -1);
        if (chi_ == -1) {
            shape_ = SurfaceShape::isolated;
            return;
        }
        if (chi_ == 0) {
            if (principal_form_represents(delta0_, spec_.ell)) {
                shape_ = SurfaceShape::ramified_loop;
                for (int v : levels_[0])
                    h_partner_[v] = v;
            } else {
                shape_ = SurfaceShape::ramified_segment;
                if (n0 % 2)
                    throw std::logic_error("volcano: odd surface with segments");
                for (int i = 0; i < n0; i += 2) {
                    h_partner_[levels_[0][i]] = levels_[0][i + 1];
                    h_partner_[levels_[0][i + 1]] = levels_[0][i];
                }
            }
            return;
        }
        shape_ = SurfaceShape::cycle;
        // The class-group cycle decomposition of a split surface is not
        // computed here; any arrangement with the right vertex count and the
        // right number of reflection-fixed vertices serves the oracle. One
        // cycle in the free or t2 = 1 case, t2/2 even cycles otherwise.
        i64 tau0 = spec_.sigma ? pic_two_torsion(delta0_) : 1;
        int ncycles = tau0 <= 1 ? 1 : static_cast<int>(tau0 / 2);
        if (n0 % ncycles)
            throw std::logic_error("volcano: cycle split does not divide surface");
        int len = n0 / ncycles;
        for (int c = 0; c < ncycles; c++)
            for (int i = 0; i < len; i++) {
                int v = levels_[0][c * len + i];
                int w = levels_[0][c * len + (i + 1) % len];
                h_next_[v] = w;
                h_prev_[w] = v;
            }
        cycle_len_ = len;
    }

    // Marking per the level-by-level rules of the Galois-action analysis,
    // case split on (ell, ramification, ord_2(delta_K)), then an explicit
    // involution consistent with the marks.
    void mark_and_pair()
    {
        enum Case { odd_unram, odd_ram, two_unram, two_8mod16, two_12mod16 } cs;
        if (spec_.ell > 2)
            cs = chi_ != 0 ? odd_unram : odd_ram;
        else if (chi_ != 0)
            cs = two_unram;
        else
            cs = ((spec_.delta_K % 16) + 16) % 16 == 8 ? two_8mod16 : two_12mod16;

        i64 tau0 = pic_two_torsion(delta0_);
        mark_surface(tau0);

        for (int k = 0; k < num_levels() - 1; k++) {
            switch (cs) {
            case odd_unram:
                for (int v : levels_[k])
                    if (fixed_[v])
                        mark_first_children(v, k == 0 ? 2 : 1);
                break;
            case odd_ram:
                for (int v : levels_[k])
                    if (fixed_[v])
                        mark_first_children(v, 1);
                break;
            case two_unram:
                if (k == 0) {
                    for (int v : levels_[0])
                        if (fixed_[v])
                            mark_first_children(v, 1);
                } else if (k <= 2) {
                    for (int v : levels_[k])
                        if (fixed_[v])
                            mark_first_children(v, 2);
                } else {
                    sibling_pair_rule(k);
                }
                break;
            case two_8mod16:
                if (k == 0) {
                    for (int v : levels_[0])
                        if (fixed_[v])
                            mark_first_children(v, 2);
                } else {
                    sibling_pair_rule(k);
                }
                break;
            case two_12mod16:
                if (k == 0) {
                    // one endpoint of each fixed segment passes the marking on
                    for (int v : levels_[0])
                        if (fixed_[v] && h_partner_[v] > v)
                            mark_first_children(v, 2);
                } else if (k == 1) {
                    for (int v : levels_[1])
                        if (fixed_[v])
                            mark_first_children(v, 2);
                } else {
                    sibling_pair_rule(k);
                }
                break;
            }
        }
        build_sigma();
    }

    void mark_surface(i64 tau0)
    {
        auto const & surf = levels_[0];
        switch (shape_) {
        case SurfaceShape::isolated:
        case SurfaceShape::ramified_loop:
            for (i64 i = 0; i < tau0; i++)
                fixed_[surf[i]] = true;
            break;
        case SurfaceShape::ramified_segment:
            // fixed vertices come in whole segments
            if (tau0 % 2)
                throw std::logic_error("volcano: odd tau0 with segment surface");
            for (i64 i = 0; i < tau0; i++)
                fixed_[surf[i]] = true;
            break;
        case SurfaceShape::cycle:
            // reflections: one fixed vertex on an odd cycle, vertex plus
            // antipode on each even cycle
            if (tau0 == 1)
                fixed_[surf[0]] = true;
            else
                for (i64 c = 0; c < tau0 / 2; c++) {
                    fixed_[surf[c * cycle_len_]] = true;
                    fixed_[surf[c * cycle_len_ + cycle_len_ / 2]] = true;
                }
            break;
        }
    }

    void mark_first_children(int v, int count)
    {
        auto const & ch = children_[v];
        if (static_cast<int>(ch.size()) < count)
            throw std::logic_error("volcano: not enough children to mark");
        for (int i = 0; i < count; i++)
            fixed_[ch[i]] = true;
    }

    // Fixed vertices at this level sit in sibling pairs; in each pair one
    // vertex keeps both of its children fixed, the other neither. Which one
    // is symmetric, so the first is chosen.
    void sibling_pair_rule(int k)
    {
        std::map<int, std::vector<int>> by_parent;
        for (int v : levels_[k])
            if (fixed_[v])
                by_parent[parent_[v]].push_back(v);
        for (auto const & [p, sibs] : by_parent) {
            if (sibs.size() != 2)
                throw std::logic_error("volcano: fixed vertices not in sibling pairs");
            mark_first_children(sibs[0], 2);
        }
    }

    void build_sigma()
    {
        sigma_.assign(parent_.size(), -1);
        // surface
        auto const & surf = levels_[0];
        int n0 = static_cast<int>(surf.size());
        if (shape_ == SurfaceShape::cycle) {
            int ncycles = n0 / cycle_len_;
            for (int c = 0; c < ncycles; c++)
                for (int i = 0; i < cycle_len_; i++)
                    sigma_[surf[c * cycle_len_ + i]] =
                        surf[c * cycle_len_ + (cycle_len_ - i) % cycle_len_];
        } else if (shape_ == SurfaceShape::ramified_segment) {
            for (int v : surf)
                sigma_[v] = fixed_[v] ? v : h_partner_[v];
        } else {
            std::vector<int> open;
            for (int v : surf) {
                if (fixed_[v])
                    sigma_[v] = v;
                else
                    open.push_back(v);
            }
            if (open.size() % 2)
                throw std::logic_error("volcano: cannot pair surface vertices");
            for (std::size_t i = 0; i < open.size(); i += 2) {
                sigma_[open[i]] = open[i + 1];
                sigma_[open[i + 1]] = open[i];
            }
        }
        // descend level by level
        for (int k = 0; k < num_levels() - 1; k++) {
            for (int v : levels_[k]) {
                int w = sigma_[v];
                if (w == v) {
                    std::vector<int> open;
                    for (int c : children_[v]) {
                        if (fixed_[c])
                            sigma_[c] = c;
                        else
                            open.push_back(c);
                    }
                    if (open.size() % 2)
                        throw std::logic_error("volcano: cannot pair children");
                    for (std::size_t i = 0; i < open.size(); i += 2) {
                        sigma_[open[i]] = open[i + 1];
                        sigma_[open[i + 1]] = open[i];
                    }
                } else if (v < w) {
                    auto const & cv = children_[v];
                    auto const & cw = children_[w];
                    for (std::size_t i = 0; i < cv.size(); i++) {
                        sigma_[cv[i]] = cw[i];
                        sigma_[cw[i]] = cv[i];
                    }
                }
            }
        }
    }

    VolcanoSpec spec_;
    i64 delta0_ = 0;
    int chi_ = 0;
    int mult_ = 1;
    SurfaceShape shape_ = SurfaceShape::isolated;
    int cycle_len_ = 0;
    std::vector<std::vector<int>> levels_;
    std::vector<int> level_of_;
    std::vector<int> parent_;
    std::vector<std::vector<int>> children_;
    std::vector<bool> fixed_;
    std::vector<int> sigma_;
    std::vector<int> h_next_, h_prev_, h_partner_;
};

// Number of vertices of the full graph at level L' fixed by an involution
// anchored at level L' or deeper: 2^b * #Pic(o(ell^L' f0))[2] when D(K) = 1,
// zero otherwise (free action).
inline i64 fixed_vertex_count(i64 D, i64 delta_K, i64 ell, i64 f0, int Lp)
{
    auto s = splitting_profile(D, delta_K);
    if (s.DK != 1)
        return 0;
    i64 disc = checked_mul(checked_pow(ell, 2 * Lp),
                           checked_mul(f0 * f0, delta_K));
    return checked_mul(i64{1} << s.b, pic_two_torsion(disc));
}

struct PathTally {
    i64 count = 0;
    i64 fixed = 0; // paths fixed by the involution (marked case)
};

struct PathType {
    int ascend = 0, horizontal = 0, descend = 0;
    auto operator<=>(PathType const &) const = default;
};

// Tallies of non-backtracking length-a paths from a designated start vertex
// at `start_level`, keyed by the canonical ascend/horizontal/descend
// decomposition. Between levels 0 and 1 of a -3 or -4 surface the parallel
// descending edges count separately and only the exact dual edge
// backtracks, matching the multiplicity convention for those graphs.
class PathEnumerator {
  public:
    PathEnumerator(MarkedComponent const & comp, int length, int start_level)
        : comp_(comp), a_(length)
    {
        if (length < 0 || start_level < 0)
            throw std::invalid_argument("path enumeration: bad arguments");
        if (start_level + length > comp.num_levels() - 1)
            throw std::invalid_argument("path enumeration: insufficient depth");
        start_ = comp.start_vertex(start_level);
    }

    std::map<PathType, PathTally> run()
    {
        tallies_.clear();
        if (a_ == 0) {
            tallies_[{0, 0, 0}] = {1, comp_.spec().sigma &&
                                          comp_.is_fixed(start_) ? 1 : 0};
            return tallies_;
        }
        bool fx = comp_.spec().sigma && comp_.is_fixed(start_);
        ascend(start_, 0, fx);
        horizontal_from(start_, 0, fx);
        descend_from(start_, 0, 0, -1, fx);
        return tallies_;
    }

  private:
    // strictly ascending prefix; at each stop, branch into horizontal and
    // descending continuations
    void ascend(int v, int c, bool fx)
    {
        if (comp_.level_of(v) == 0)
            return;
        int p = comp_.parent(v);
        int nc = c + 1;
        bool nfx = fx && comp_.is_fixed(p);
        if (nc == a_) {
            record({nc, 0, 0}, nfx);
            return;
        }
        ascend(p, nc, nfx);
        horizontal_from(p, nc, nfx);
        descend_from(p, nc, 0, v, nfx); // cannot re-descend to v via the dual
    }

    void horizontal_from(int v, int c, bool fx)
    {
        if (comp_.level_of(v) != 0 || c >= a_)
            return;
        switch (comp_.shape()) {
        case SurfaceShape::isolated:
            return;
        case SurfaceShape::ramified_loop:
        case SurfaceShape::ramified_segment: {
            int w = comp_.segment_partner(v);
            // a second surface step would traverse the dual edge
            bool nfx = fx && comp_.is_fixed(w);
            finish_horizontal(w, c, 1, nfx);
            return;
        }
        case SurfaceShape::cycle: {
            // two directions, then the walk is forced
            for (int dir = 0; dir < 2; dir++) {
                int w = v;
                for (int h = 1; c + h <= a_; h++) {
                    w = dir == 0 ? comp_.cycle_next(w) : comp_.cycle_prev(w);
                    finish_horizontal(w, c, h, false);
                }
            }
            return;
        }
        }
    }

    void finish_horizontal(int w, int c, int h, bool fx)
    {
        if (c + h == a_) {
            record({c, h, 0}, fx);
            return;
        }
        descend_from(w, c, h, -1, fx);
    }

    // descend the remaining a - c - h steps in all non-backtracking ways;
    // `banned` is the child reached by the dual of an ascending edge just
    // traversed (one parallel copy of it is excluded)
    void descend_from(int v, int c, int h, int banned, bool fx)
    {
        int steps = a_ - c - h;
        if (steps == 0)
            return;
        if (comp_.level_of(v) + steps > comp_.num_levels() - 1)
            throw std::invalid_argument("path enumeration: insufficient depth");
        descend_rec(v, c, h, steps, banned, fx, 1);
    }

    void descend_rec(int v, int c, int h, int remaining, int banned, bool fx,
                     i64 ways)
    {
        if (remaining == 0) {
            record_many({c, h, a_ - c - h}, ways, fx);
            return;
        }
        int mult = comp_.level_of(v) == 0 ? comp_.edge_multiplicity() : 1;
        for (int w : comp_.children(v)) {
            i64 copies = mult - (w == banned ? 1 : 0);
            if (copies <= 0)
                continue;
            bool nfx = fx && comp_.is_fixed(w);
            descend_rec(w, c, h, remaining - 1, -1, nfx,
                        checked_mul(ways, copies));
        }
    }

    void record(PathType t, bool fx) { record_many(t, 1, fx); }

    void record_many(PathType t, i64 n, bool fx)
    {
        auto & tally = tallies_[t];
        tally.count += n;
        if (fx)
            tally.fixed += n;
    }

    MarkedComponent const & comp_;
    int a_;
    int start_;
    std::map<PathType, PathTally> tallies_;
};

inline std::map<PathType, PathTally> enumerate_paths(MarkedComponent const & comp,
                                                     int length, int start_level)
{
    return PathEnumerator(comp, length, start_level).run();
}

} // namespace shimcm

#endif
