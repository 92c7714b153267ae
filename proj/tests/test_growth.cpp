#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <set>

#include "polysub/growth.hpp"

using namespace polysub;

namespace {

std::string fixture(const std::string& name) { return std::string(FIXTURE_DIR) + "/" + name; }

GluingSpec torus() { return parse_spec_file(fixture("torus3.poly")); }
GluingSpec dodec() { return parse_spec_file(fixture("dodec-orbifold.poly")); }

// stage-0 edge by the template vertex labels of its endpoints
EdgeId edge_by_labels(const GluingSpec& spec, const TilingStage& s, const std::string& a,
                      const std::string& b) {
    VertexId va = spec.templates[0].vertex_by_name(a);
    VertexId vb = spec.templates[0].vertex_by_name(b);
    if (vb < va) std::swap(va, vb);
    for (const StageEdge& e : s.edges)
        if (e.v1 == va && e.v2 == vb) return e.id;
    REQUIRE(false);
    return -1;
}

void set_count(TilingStage& s, EdgeId id, int count) {
    for (StageEdge& e : s.edges)
        if (e.id == id) e.count = count;
}

int count_status(const GluingSpec& spec, const TilingStage& s, EdgeStatus st) {
    int n = 0;
    for (const StageEdge& e : s.edges) n += s.status(spec, e) == st;
    return n;
}

}  // namespace

TEST_CASE("initial stages") {
    auto tspec = torus();
    auto s0 = initial_stage(tspec, "cube");
    CHECK(s0.stage == 0);
    CHECK(s0.faces.size() == 6);
    CHECK(s0.edges.size() == 12);
    CHECK(count_status(tspec, s0, EdgeStatus::Unburdened) == 12);
    CHECK(to_complex(s0).is_sphere());
    CHECK(verify_stage(tspec, s0).pass);

    auto dspec = dodec();
    auto d0 = initial_stage(dspec, "dodeca");
    CHECK(d0.faces.size() == 12);
    CHECK(d0.edges.size() == 30);
    CHECK(count_status(dspec, d0, EdgeStatus::Unburdened) == 30);

    CHECK_THROWS_WITH_AS(initial_stage(tspec, "pyramid"), doctest::Contains("UnknownTemplate"),
                         Error);
}

TEST_CASE("stage zero sites are single faces") {
    auto spec = torus();
    auto s0 = initial_stage(spec, "cube");
    auto sites = detect_loaded_fans(spec, s0);
    CHECK(sites.size() == 6);
    for (const auto& s : sites) {
        CHECK(s.faces.size() == 1);
        CHECK(s.loaded_edges.empty());
    }
}

TEST_CASE("torus growth to S(1)") {
    auto spec = torus();
    auto s1 = grow(initial_stage(spec, "cube"), spec);
    CHECK(s1.stage == 1);
    CHECK(s1.faces.size() == 30);  // boundary of the 7-cube plus-shape
    CHECK(s1.edges.size() == 60);
    CHECK(to_complex(s1).euler_characteristic() == 2);
    CHECK(count_status(spec, s1, EdgeStatus::Loaded) == 12);
    CHECK(count_status(spec, s1, EdgeStatus::Unburdened) == 48);
    CHECK(verify_stage(spec, s1).pass);
    CHECK(s1.instances.size() == 6);

    // the twelve original edges are now loaded with count 3
    for (const StageEdge& e : s1.edges)
        if (e.id < 12) CHECK(e.count == 3);

    auto sites = detect_loaded_fans(spec, s1);
    int pairs = 0, singles = 0;
    for (const auto& s : sites) {
        if (s.faces.size() == 2) {
            ++pairs;
            CHECK(s.loaded_edges.size() == 1);
            CHECK(s1.edge(s.loaded_edges[0]).id < 12);
        } else {
            CHECK(s.faces.size() == 1);
            ++singles;
        }
    }
    CHECK(pairs == 12);
    CHECK(singles == 6);
}

TEST_CASE("torus growth chain invariants") {
    auto spec = torus();
    auto s = initial_stage(spec, "cube");
    for (int n = 1; n <= 3; ++n) {
        std::map<EdgeId, int> before;
        for (const StageEdge& e : s.edges) before[e.id] = e.count;
        s = grow(s, spec);
        CHECK(s.stage == n);
        CHECK(verify_stage(spec, s).pass);
        for (const StageEdge& e : s.edges) {
            CHECK(e.count % 2 == 1);  // parity: counts stay odd until burial
            auto it = before.find(e.id);
            if (it != before.end()) CHECK(e.count == it->second + 2);
        }
        // ids are never reused
        CHECK(s.faces.front().id >= (n > 0 ? 6 : 0));
    }
}

TEST_CASE("odd cycle length dies during growth") {
    std::string text = R"(
polyhedron tetra
face a: 3 1 2
face b: 4 1 3
face c: 3 2 4
face d: 2 1 4
mirror tetra.a
mirror tetra.b
mirror tetra.c
mirror tetra.d
cyclelength tetra.a.3-1 3
cyclelength tetra.a.1-2 3
cyclelength tetra.a.2-3 3
cyclelength tetra.b.4-1 3
cyclelength tetra.b.3-4 3
cyclelength tetra.c.2-4 3
)";
    auto spec = parse_spec(text);
    auto s0 = initial_stage(spec, "tetra");
    CHECK_THROWS_WITH_AS(grow(s0, spec), doctest::Contains("GluingInconsistency"), Error);
}

TEST_CASE("wedge violation detected") {
    auto spec = torus();
    auto s0 = initial_stage(spec, "cube");
    // two opposite edges of the bottom face marked loaded (count 3 of 4)
    set_count(s0, edge_by_labels(spec, s0, "1", "4"), 3);
    set_count(s0, edge_by_labels(spec, s0, "3", "2"), 3);
    CHECK_THROWS_WITH_AS(detect_loaded_fans(spec, s0), doctest::Contains("WedgeViolation"), Error);
    auto rep = verify_stage(spec, s0);
    CHECK_FALSE(rep.pass);
    for (const auto& c : rep.checks) {
        if (c.name == "wedge") CHECK_FALSE(c.pass);
        if (c.name == "fans") CHECK_FALSE(c.pass);
    }
}

TEST_CASE("skew edge detected") {
    auto spec = torus();
    auto s0 = initial_stage(spec, "cube");
    // loaded edges at the two ends of edge 2-6, flanking disjoint face pairs
    set_count(s0, edge_by_labels(spec, s0, "2", "3"), 3);
    set_count(s0, edge_by_labels(spec, s0, "5", "6"), 3);
    auto rep = verify_stage(spec, s0);
    CHECK_FALSE(rep.pass);
    bool skew_failed = false;
    for (const auto& c : rep.checks) {
        if (c.name == "skew") {
            skew_failed = !c.pass;
            CHECK(c.witness.find("skew") != std::string::npos);
        }
        if (c.name == "wedge") CHECK(c.pass);
    }
    CHECK(skew_failed);
}

TEST_CASE("oracle matches growth on the torus") {
    auto spec = torus();
    auto s = initial_stage(spec, "cube");
    CHECK(isomorphic(oracle_boundary(spec, "cube", 0), to_complex(s)));
    auto o1 = oracle_boundary(spec, "cube", 1);
    CHECK(o1.face_count() == 30);
    for (int n = 1; n <= 3; ++n) {
        s = grow(s, spec);
        CHECK(isomorphic(oracle_boundary(spec, "cube", n), to_complex(s)));
    }
    CHECK_THROWS_WITH_AS(oracle_boundary(spec, "cube", 4), doctest::Contains("CapExceeded"),
                         Error);
}

TEST_CASE("mirror orbifold growth") {
    auto spec = dodec();
    auto s = initial_stage(spec, "dodeca");
    s = grow(s, spec);
    CHECK(s.faces.size() == 132);  // 12 reflected copies, 11 exposed faces each
    CHECK(count_status(spec, s, EdgeStatus::Loaded) == 30);
    CHECK(verify_stage(spec, s).pass);

    auto sites = detect_loaded_fans(spec, s);
    int pairs = 0, singles = 0;
    for (const auto& st : sites) (st.faces.size() == 2 ? pairs : singles)++;
    CHECK(pairs == 30);
    CHECK(singles == 72);

    CHECK(isomorphic(oracle_boundary(spec, "dodeca", 1), to_complex(s)));
    s = grow(s, spec);
    CHECK(verify_stage(spec, s).pass);
    CHECK(isomorphic(oracle_boundary(spec, "dodeca", 2), to_complex(s)));

    for (int n = 3; n <= 4; ++n) {
        s = grow(s, spec);
        CHECK(verify_stage(spec, s).pass);
    }
}
