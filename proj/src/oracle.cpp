#include <algorithm>
#include <deque>
#include <map>
#include <numeric>
#include <queue>
#include <vector>

#include "polysub/growth.hpp"

namespace polysub {

namespace {

constexpr int kCosetCap = 2000000;

// Coset enumeration over polyhedron instances of the universal-cover ball.
// Each coset is one path class from the base instance; crossing a face leads
// to the neighboring instance, and the cycle relation around every edge
// (alternately crossing a face and switching to the other face of the image
// edge, cycle-length times) forces coincidences.
struct Enumerator {
    const GluingSpec& spec;
    std::vector<Index> tmpl;
    std::vector<char> refl;
    std::vector<std::vector<int>> nbr;  // per coset, per template face
    std::vector<int> rep;               // union-find
    std::deque<std::pair<int, int>> coincidences;

    explicit Enumerator(const GluingSpec& s) : spec(s) {}

    int find(int c) {
        while (rep[c] != c) c = rep[c] = rep[rep[c]];
        return c;
    }

    int create(Index t, bool r) {
        if (static_cast<int>(tmpl.size()) >= kCosetCap)
            fail("CapExceeded", "coset enumeration exceeded the instance cap");
        tmpl.push_back(t);
        refl.push_back(r);
        nbr.emplace_back(spec.templates[t].complex.face_count(), -1);
        rep.push_back(static_cast<int>(rep.size()));
        return static_cast<int>(rep.size()) - 1;
    }

    void merge(int a, int b) {
        coincidences.emplace_back(a, b);
        while (!coincidences.empty()) {
            auto [x, y] = coincidences.front();
            coincidences.pop_front();
            x = find(x);
            y = find(y);
            if (x == y) continue;
            if (y < x) std::swap(x, y);
            if (tmpl[x] != tmpl[y] || refl[x] != refl[y])
                fail("GluingInconsistency", "edge cycle relations identify mismatched instances");
            rep[y] = x;
            for (size_t f = 0; f < nbr[y].size(); ++f) {
                if (nbr[y][f] == -1) continue;
                if (nbr[x][f] == -1)
                    nbr[x][f] = nbr[y][f];
                else
                    coincidences.emplace_back(nbr[x][f], nbr[y][f]);
            }
        }
    }

    // cross face f of coset c, creating the neighbor if needed
    int cross(int c, Index f) {
        c = find(c);
        if (nbr[c][f] != -1) return find(nbr[c][f]);
        PairImage img = apply_pairing(spec, tmpl[c], f);
        const FacePairing& p = spec.pairings[spec.pairing_of[tmpl[c]][f]];
        int d = create(img.tmpl, refl[c] ^ p.mirror);
        nbr[c][f] = d;
        nbr[d][img.face] = c;
        return d;
    }

    // one step of the rotation around an edge: (coset, edge, face to cross)
    struct Corner {
        int c;
        Index e, f;
    };
    bool step(Corner& cur) {
        int c = find(cur.c);
        if (nbr[c][cur.f] == -1) return false;
        int d = find(nbr[c][cur.f]);
        PairImage img = apply_pairing(spec, tmpl[c], cur.f);
        auto [a, b] = spec.templates[tmpl[c]].complex.edge_endpoints(cur.e);
        Index e2 = edge_between(spec.templates[tmpl[d]].complex, img.vertex_map[a],
                                img.vertex_map[b]);
        auto [fa, fb] = spec.templates[tmpl[d]].complex.edge_faces(e2);
        cur = {d, e2, fa == img.face ? fb : fa};
        return true;
    }

    // apply every completable edge-cycle relation until nothing changes
    void close() {
        bool changed = true;
        while (changed) {
            changed = false;
            for (int c0 = 0; c0 < static_cast<int>(rep.size()); ++c0) {
                if (find(c0) != c0) continue;
                const SphericalComplex& tc = spec.templates[tmpl[c0]].complex;
                for (Index e = 0; e < tc.edge_count(); ++e) {
                    auto [fa, fb] = tc.edge_faces(e);
                    for (Index f : {fa, fb}) {
                        int len = spec.cycle_length(tmpl[c0], e);
                        Corner cur{c0, e, f};
                        bool full = true;
                        for (int i = 0; i < len && full; ++i) full = step(cur);
                        if (full && find(cur.c) != find(c0)) {
                            merge(cur.c, c0);
                            changed = true;
                        }
                    }
                }
            }
        }
    }

    std::vector<int> dist() {
        std::vector<int> d(rep.size(), -1);
        std::queue<int> q;
        int base = find(0);
        d[base] = 0;
        q.push(base);
        while (!q.empty()) {
            int c = q.front();
            q.pop();
            for (int raw : nbr[c]) {
                if (raw == -1) continue;
                int e = find(raw);
                if (d[e] == -1) {
                    d[e] = d[c] + 1;
                    q.push(e);
                }
            }
        }
        return d;
    }
};

}  // namespace

SphericalComplex oracle_boundary(const GluingSpec& spec, const std::string& base_template, int n,
                                 int cap) {
    if (n > cap) fail("CapExceeded", "oracle depth " + std::to_string(n) + " exceeds cap " +
                                         std::to_string(cap));
    Index base = spec.template_index(base_template);
    if (base == kNone) fail("UnknownTemplate", "no polyhedron named '" + base_template + "'");

    Enumerator en(spec);
    en.create(base, false);

    // expand until every instance inside the ball has all neighbors realized,
    // closing relations as we go so duplicates collapse early
    bool expanded = true;
    while (expanded) {
        expanded = false;
        en.close();
        auto d = en.dist();
        const int live = static_cast<int>(d.size());  // cross() appends cosets
        for (int c = 0; c < live; ++c) {
            if (en.find(c) != c || d[c] == -1 || d[c] > n) continue;
            for (size_t f = 0; f < en.nbr[c].size(); ++f)
                if (en.nbr[c][f] == -1) {
                    en.cross(c, static_cast<Index>(f));
                    expanded = true;
                }
        }
    }

    auto d = en.dist();
    auto in_ball = [&](int c) { return d[c] != -1 && d[c] <= n; };

    // identify boundary cells across interior face gluings
    std::vector<size_t> voffset(en.rep.size() + 1, 0), eoffset(en.rep.size() + 1, 0);
    for (size_t c = 0; c < en.rep.size(); ++c) {
        const SphericalComplex& tc = spec.templates[en.tmpl[c]].complex;
        voffset[c + 1] = voffset[c] + tc.vertex_count();
        eoffset[c + 1] = eoffset[c] + tc.edge_count();
    }
    std::vector<size_t> vrep(voffset.back()), erep(eoffset.back());
    std::iota(vrep.begin(), vrep.end(), 0);
    std::iota(erep.begin(), erep.end(), 0);
    auto cfind = [](std::vector<size_t>& r, size_t x) {
        while (r[x] != x) x = r[x] = r[r[x]];
        return x;
    };
    auto cunion = [&](std::vector<size_t>& r, size_t a, size_t b) {
        a = cfind(r, a);
        b = cfind(r, b);
        if (a != b) r[std::max(a, b)] = std::min(a, b);
    };

    for (int c = 0; c < static_cast<int>(en.rep.size()); ++c) {
        if (en.find(c) != c || !in_ball(c)) continue;
        const SphericalComplex& tc = spec.templates[en.tmpl[c]].complex;
        for (Index f = 0; f < tc.face_count(); ++f) {
            if (en.nbr[c][f] == -1) continue;
            int e = en.find(en.nbr[c][f]);
            if (!in_ball(e)) continue;
            PairImage img = apply_pairing(spec, en.tmpl[c], f);
            const SphericalComplex& ec = spec.templates[en.tmpl[e]].complex;
            auto cyc = tc.face_vertices(f);
            for (size_t i = 0; i < cyc.size(); ++i) {
                cunion(vrep, voffset[c] + cyc[i], voffset[e] + img.vertex_map[cyc[i]]);
                Index te = edge_between(tc, cyc[i], cyc[(i + 1) % cyc.size()]);
                Index te2 = edge_between(ec, img.vertex_map[cyc[i]],
                                         img.vertex_map[cyc[(i + 1) % cyc.size()]]);
                cunion(erep, eoffset[c] + te, eoffset[e] + te2);
            }
        }
    }

    std::vector<FaceInput> faces;
    for (int c = 0; c < static_cast<int>(en.rep.size()); ++c) {
        if (en.find(c) != c || !in_ball(c)) continue;
        const SphericalComplex& tc = spec.templates[en.tmpl[c]].complex;
        for (Index f = 0; f < tc.face_count(); ++f) {
            int raw = en.nbr[c][f];
            if (raw != -1 && in_ball(en.find(raw))) continue;  // interior face
            auto cyc = tc.face_vertices(f);
            if (en.refl[c]) std::reverse(cyc.begin() + 1, cyc.end());
            FaceInput fi;
            for (size_t i = 0; i < cyc.size(); ++i) {
                fi.vertices.push_back(static_cast<VertexId>(cfind(vrep, voffset[c] + cyc[i])));
                Index te = edge_between(tc, cyc[i], cyc[(i + 1) % cyc.size()]);
                fi.edges.push_back(static_cast<EdgeId>(cfind(erep, eoffset[c] + te)));
            }
            faces.push_back(std::move(fi));
        }
    }
    return SphericalComplex::build_with_edges(faces);
}

}  // namespace polysub
