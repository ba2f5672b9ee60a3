#ifndef SHIMCM_SERIALIZE_HPP
#define SHIMCM_SERIALIZE_HPP

#include <json.hpp>

#include <sstream>

#include "cm_locus.hpp"
#include "sporadic.hpp"
#include "volcano.hpp"

// Machine-readable output: the fiber JSON schema, the volcano adjacency
// dump, and scan CSV rows. Key names and ordering are part of the contract;
// see schema/.

namespace shimcm {

inline nlohmann::ordered_json fiber_to_json(FiberDesc const & fd)
{
    nlohmann::ordered_json j;
    j["D"] = fd.D;
    j["N"] = fd.N;
    j["delta"] = fd.delta;
    j["b"] = fd.b;
    j["dK_part"] = fd.DK;
    j["base"] = {{"conductor", fd.base.conductor},
                 {"index2", fd.base.index2},
                 {"degree", fd.base.abs_degree}};
    auto classes = nlohmann::ordered_json::array();
    for (auto const & c : fd.classes) { // already sorted by (conductor, index2, e)
        nlohmann::ordered_json jc;
        jc["count"] = c.count;
        jc["conductor"] = c.field.conductor;
        jc["index2"] = c.field.index2;
        jc["e"] = c.e;
        jc["rel_degree"] = c.rel_degree;
        jc["abs_degree"] = c.field.abs_degree;
        classes.push_back(jc);
    }
    j["classes"] = classes;
    return j;
}

inline char const * to_string(SurfaceShape s)
{
    switch (s) {
    case SurfaceShape::isolated:
        return "isolated";
    case SurfaceShape::ramified_loop:
        return "loop";
    case SurfaceShape::ramified_segment:
        return "segment";
    case SurfaceShape::cycle:
        return "cycle";
    }
    return "?";
}

inline nlohmann::ordered_json volcano_to_json(MarkedComponent const & mc)
{
    auto const & spec = mc.spec();
    nlohmann::ordered_json j;
    j["ell"] = spec.ell;
    j["delta_K"] = spec.delta_K;
    j["f0"] = spec.f0;
    j["depth"] = spec.depth;
    j["sigma"] = spec.sigma;
    j["surface_shape"] = to_string(mc.shape());
    j["edge_multiplicity"] = mc.edge_multiplicity();
    auto vertices = nlohmann::ordered_json::array();
    for (int k = 0; k < mc.num_levels(); k++)
        for (int v : mc.level(k)) {
            nlohmann::ordered_json jv;
            jv["id"] = v;
            jv["level"] = k;
            jv["fixed"] = mc.is_fixed(v);
            vertices.push_back(jv);
        }
    j["vertices"] = vertices;
    auto edges = nlohmann::ordered_json::array();
    auto push_edge = [&](int from, int to, char const * type, int mult) {
        nlohmann::ordered_json je;
        je["from"] = from;
        je["to"] = to;
        je["type"] = type;
        je["multiplicity"] = mult;
        edges.push_back(je);
    };
    for (int k = 0; k < mc.num_levels(); k++)
        for (int v : mc.level(k)) {
            int mult = k == 0 ? mc.edge_multiplicity() : 1;
            for (int c : mc.children(v))
                push_edge(v, c, "descending", mult);
        }
    switch (mc.shape()) {
    case SurfaceShape::isolated:
        break;
    case SurfaceShape::ramified_loop:
    case SurfaceShape::ramified_segment:
        for (int v : mc.level(0))
            if (mc.segment_partner(v) >= v)
                push_edge(v, mc.segment_partner(v), "horizontal", 1);
        break;
    case SurfaceShape::cycle:
        for (int v : mc.level(0))
            push_edge(v, mc.cycle_next(v), "horizontal", 1);
        break;
    }
    j["edges"] = edges;
    return j;
}

inline std::string scan_csv_header()
{
    return "D,N,verdict,rule,d_cm,genus,heegner_disc,bound_rhs";
}

inline std::string scan_csv_row(SporadicVerdict const & v)
{
    std::ostringstream out;
    out << v.D << ',' << v.N << ',' << to_string(v.verdict) << ',' << v.rule << ','
        << v.d_cm << ',' << v.genus << ',';
    if (v.heegner)
        out << v.heegner->delta_K;
    out << ',' << v.dcm_rhs;
    return out.str();
}

} // namespace shimcm

#endif
