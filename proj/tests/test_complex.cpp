#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>

#include "polysub/complex.hpp"
#include "shapes.hpp"

using namespace polysub;

namespace {

// id-permuted copy of a set of face cycles
shapes::Cycles permute(const shapes::Cycles& cycles, unsigned seed) {
    std::vector<VertexId> ids;
    for (const auto& c : cycles)
        for (VertexId v : c) ids.push_back(v);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    std::vector<VertexId> target = ids;
    std::mt19937 rng(seed);
    std::shuffle(target.begin(), target.end(), rng);
    std::map<VertexId, VertexId> m;
    for (size_t i = 0; i < ids.size(); ++i) m[ids[i]] = target[i] * 17 + 1000;
    shapes::Cycles out = cycles;
    std::shuffle(out.begin(), out.end(), rng);
    for (auto& c : out)
        for (auto& v : c) v = m[v];
    return out;
}

int brute_force_fan_count(const SphericalComplex& c) {
    // every face, plus every contiguous chain of >=2 faces around a vertex
    int n = c.face_count();
    for (Index v = 0; v < c.vertex_count(); ++v) {
        Index d = c.valence(v);
        n += d * (d - 2) + 1;
    }
    return n;
}

}  // namespace

TEST_CASE("build cube") {
    auto c = shapes::make(shapes::cube());
    CHECK(c.vertex_count() == 8);
    CHECK(c.edge_count() == 12);
    CHECK(c.face_count() == 6);
    CHECK(c.euler_characteristic() == 2);
    CHECK(c.is_sphere());
    for (Index v = 0; v < 8; ++v) CHECK(c.valence(v) == 3);
}

TEST_CASE("build tetrahedron") {
    auto c = shapes::make(shapes::tetrahedron());
    CHECK(c.vertex_count() == 4);
    CHECK(c.edge_count() == 6);
    CHECK(c.face_count() == 4);
    CHECK(c.is_sphere());
}

TEST_CASE("reference solids are spheres") {
    for (const auto& cyc : {shapes::octahedron(), shapes::dodecahedron(), shapes::icosahedron(),
                            shapes::triangular_prism()}) {
        auto c = shapes::make(cyc);
        CHECK(c.is_sphere());
    }
}

TEST_CASE("face extraction reproduces input cycles up to rotation") {
    auto cycles = shapes::dodecahedron();
    auto c = shapes::make(cycles);
    for (Index f = 0; f < c.face_count(); ++f) {
        auto got = c.face_vertex_ids(f);
        auto want = cycles[f];
        // rotate got so it starts at want[0]
        auto it = std::find(got.begin(), got.end(), want[0]);
        REQUIRE(it != got.end());
        std::rotate(got.begin(), it, got.end());
        CHECK(got == want);
    }
}

TEST_CASE("non-manifold edge rejected") {
    shapes::Cycles bad = {{1, 2, 3}, {2, 1, 4}, {1, 2, 5}};
    CHECK_THROWS_WITH_AS(shapes::make(bad), doctest::Contains("NonManifoldEdge"), Error);
}

TEST_CASE("orientation mismatch rejected") {
    // two triangles traversing edge 1-2 in the same direction
    shapes::Cycles bad = {{1, 2, 3}, {1, 2, 4}};
    CHECK_THROWS_WITH_AS(shapes::make(bad), doctest::Contains("OrientationMismatch"), Error);
}

TEST_CASE("disconnected input rejected") {
    shapes::Cycles bad = {{1, 2, 3}, {3, 2, 1}, {4, 5, 6}, {6, 5, 4}};
    CHECK_THROWS_WITH_AS(shapes::make(bad), doctest::Contains("Disconnected"), Error);
}

TEST_CASE("disk patch has boundary") {
    shapes::Cycles cyc = {{1, 2, 6, 5}, {2, 3, 7, 6}};  // two squares of the cube
    auto c = shapes::make(cyc);
    CHECK(c.has_boundary());
    CHECK_FALSE(c.is_sphere());
    CHECK(c.euler_characteristic() == 1);
}

TEST_CASE("fan enumeration") {
    auto cube = shapes::make(shapes::cube());
    auto fans = enumerate_fans(cube);
    CHECK(static_cast<int>(fans.size()) == 38);
    CHECK(brute_force_fan_count(cube) == 38);
    int size1 = 0, stars = 0;
    for (const auto& f : fans) {
        if (f.size() == 1) {
            ++size1;
            CHECK(f.center == kNone);
        }
        if (f.star) {
            ++stars;
            CHECK(f.size() == 3);  // valence-3 star
        }
    }
    CHECK(size1 == 6);
    CHECK(stars == 8);

    for (const auto& cyc : {shapes::tetrahedron(), shapes::octahedron(), shapes::dodecahedron()}) {
        auto c = shapes::make(cyc);
        CHECK(static_cast<int>(enumerate_fans(c).size()) == brute_force_fan_count(c));
    }
}

TEST_CASE("fan chain faces are consecutive-adjacent at center") {
    auto c = shapes::make(shapes::dodecahedron());
    for (const auto& fan : enumerate_fans(c)) {
        if (fan.size() < 2) continue;
        for (size_t i = 0; i + 1 < fan.faces.size(); ++i) {
            Index e = c.shared_edge(fan.faces[i], fan.faces[i + 1]);
            REQUIRE(e != kNone);
            auto [a, b] = c.edge_endpoints(e);
            CHECK((a == fan.center || b == fan.center));
        }
    }
}

TEST_CASE("signature invariant under relabeling") {
    auto base = canonical_signature(shapes::make(shapes::cube()));
    for (unsigned seed : {1u, 2u, 3u, 4u, 5u}) {
        auto sig = canonical_signature(shapes::make(permute(shapes::cube(), seed)));
        CHECK(sig == base);
    }
    auto dbase = canonical_signature(shapes::make(shapes::dodecahedron()));
    for (unsigned seed : {7u, 8u}) {
        CHECK(canonical_signature(shapes::make(permute(shapes::dodecahedron(), seed))) == dbase);
    }
}

TEST_CASE("signature separates non-isomorphic complexes") {
    CHECK(canonical_signature(shapes::make(shapes::cube())) !=
          canonical_signature(shapes::make(shapes::octahedron())));
    CHECK_FALSE(isomorphic(shapes::make(shapes::cube()), shapes::make(shapes::octahedron())));
    CHECK(isomorphic(shapes::make(shapes::cube()), shapes::make(permute(shapes::cube(), 42))));
}

TEST_CASE("labels participate in signatures") {
    auto c = shapes::make(shapes::cube());
    CellLabels plain;
    CellLabels loaded;
    loaded.edge.assign(c.edge_count(), "");
    loaded.edge[0] = "loaded";
    CHECK(canonical_signature(c, plain) != canonical_signature(c, loaded));
}

TEST_CASE("automorphisms of the cube") {
    auto c = shapes::make(shapes::cube());
    auto autos = all_isomorphisms(c, {}, c, {});
    CHECK(autos.size() == 48);  // rotations and reflections
    int reflected = 0;
    for (const auto& a : autos) reflected += a.reflected;
    CHECK(reflected == 24);
}

TEST_CASE("mirrored complex is reflection-isomorphic") {
    auto c = shapes::make(shapes::dodecahedron());
    auto m = c.mirrored();
    CHECK(m.is_sphere());
    CHECK(canonical_signature(c) == canonical_signature(m));
}
