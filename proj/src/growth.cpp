#include "polysub/growth.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace polysub {

namespace {

template <typename T, typename Id>
const T& by_id(const std::vector<T>& v, Id id, const char* what) {
    auto it = std::lower_bound(v.begin(), v.end(), id,
                               [](const T& x, Id i) { return x.id < i; });
    if (it == v.end() || it->id != id) fail("GluingInconsistency", std::string("unknown ") + what);
    return *it;
}

std::vector<Index> aligned_cycle(const GluingSpec& spec, Index tmpl, Index face, bool reflected) {
    auto cyc = spec.templates[tmpl].complex.face_vertices(face);
    if (reflected) std::reverse(cyc.begin() + 1, cyc.end());
    return cyc;
}

}  // namespace

const StageEdge& TilingStage::edge(EdgeId id) const { return by_id(edges, id, "edge"); }

const StageInstance& TilingStage::instance(Index id) const {
    return by_id(instances, id, "instance");
}

EdgeStatus TilingStage::status(const GluingSpec& spec, const StageEdge& e) const {
    if (e.count == cycle_length(spec, e) - 1) return EdgeStatus::Loaded;
    return e.count > 1 ? EdgeStatus::Burdened : EdgeStatus::Unburdened;
}

SphericalComplex to_complex(const TilingStage& stage) {
    std::vector<FaceInput> faces;
    faces.reserve(stage.faces.size());
    for (const StageFace& f : stage.faces) faces.push_back({f.vertices, f.edges});
    return SphericalComplex::build_with_edges(faces);
}

std::vector<Index> face_template_cycle(const GluingSpec& spec, const TilingStage& stage,
                                       const StageFace& f) {
    const StageInstance& inst = stage.instance(f.instance);
    return aligned_cycle(spec, inst.tmpl, f.template_face, inst.reflected);
}

TilingStage initial_stage(const GluingSpec& spec, const std::string& base_template) {
    Index t = spec.template_index(base_template);
    if (t == kNone) fail("UnknownTemplate", "no polyhedron named '" + base_template + "'");
    const SphericalComplex& c = spec.templates[t].complex;

    TilingStage s;
    s.stage = 0;
    s.instances.push_back({0, t, false});
    s.next_instance = 1;
    s.next_vertex = c.vertex_count();
    s.next_edge = c.edge_count();
    s.next_face = c.face_count();
    for (Index e = 0; e < c.edge_count(); ++e) {
        auto [a, b] = c.edge_endpoints(e);
        s.edges.push_back({e, std::min(a, b), std::max(a, b), spec.edge_class_of[t][e], 1});
    }
    for (Index f = 0; f < c.face_count(); ++f) {
        StageFace sf;
        sf.id = f;
        sf.instance = 0;
        sf.template_face = f;
        for (Index v : c.face_vertices(f)) sf.vertices.push_back(v);
        auto cyc = c.face_vertices(f);
        for (size_t i = 0; i < cyc.size(); ++i)
            sf.edges.push_back(edge_between(c, cyc[i], cyc[(i + 1) % cyc.size()]));
        s.faces.push_back(std::move(sf));
    }
    return s;
}

std::vector<GluingSite> detect_loaded_fans(const GluingSpec& spec, const TilingStage& stage) {
    size_t nf = stage.faces.size();

    std::set<EdgeId> loaded;
    for (const StageEdge& e : stage.edges)
        if (stage.status(spec, e) == EdgeStatus::Loaded) loaded.insert(e.id);

    // which faces flank each edge
    std::map<EdgeId, std::vector<Index>> edge_faces;
    for (size_t fi = 0; fi < nf; ++fi)
        for (EdgeId e : stage.faces[fi].edges) edge_faces[e].push_back(static_cast<Index>(fi));

    // per-face loaded edges, with the wedge condition enforced
    std::vector<std::vector<EdgeId>> face_loaded(nf);
    for (size_t fi = 0; fi < nf; ++fi) {
        const StageFace& f = stage.faces[fi];
        size_t k = f.edges.size();
        std::vector<size_t> pos;
        for (size_t i = 0; i < k; ++i)
            if (loaded.count(f.edges[i])) pos.push_back(i);
        if (pos.size() > 2)
            fail("WedgeViolation",
                 "face " + std::to_string(f.id) + " has " + std::to_string(pos.size()) +
                     " loaded edges");
        if (pos.size() == 2) {
            bool contiguous = (pos[1] == pos[0] + 1) || (pos[0] == 0 && pos[1] == k - 1);
            if (!contiguous)
                fail("WedgeViolation", "face " + std::to_string(f.id) +
                                           " has two non-contiguous loaded edges");
        }
        for (size_t i : pos) face_loaded[fi].push_back(f.edges[i]);
    }

    std::vector<GluingSite> sites;
    std::vector<bool> seen(nf, false);

    for (size_t start = 0; start < nf; ++start) {
        if (seen[start] || face_loaded[start].empty()) continue;
        // gather the connected component along loaded edges
        std::vector<Index> comp;
        std::vector<Index> stack{static_cast<Index>(start)};
        seen[start] = true;
        while (!stack.empty()) {
            Index fi = stack.back();
            stack.pop_back();
            comp.push_back(fi);
            for (EdgeId e : face_loaded[fi])
                for (Index gi : edge_faces[e])
                    if (!seen[gi]) {
                        if (face_loaded[gi].empty())
                            fail("SkewConfiguration", "loaded edge " + std::to_string(e) +
                                                          " borders unloaded face " +
                                                          std::to_string(stage.faces[gi].id));
                        seen[gi] = true;
                        stack.push_back(gi);
                    }
        }

        std::vector<Index> ends;  // faces with a single loaded edge
        for (Index fi : comp)
            if (face_loaded[fi].size() == 1) ends.push_back(fi);

        GluingSite site;
        Index cur, prev = kNone;
        if (ends.empty()) {
            // closed ring of wedges: a loaded star
            site.star = true;
            cur = *std::min_element(comp.begin(), comp.end(), [&](Index a, Index b) {
                return stage.faces[a].id < stage.faces[b].id;
            });
        } else if (ends.size() == 2) {
            cur = stage.faces[ends[0]].id <= stage.faces[ends[1]].id ? ends[0] : ends[1];
        } else {
            fail("SkewConfiguration", "loaded faces around face " +
                                          std::to_string(stage.faces[comp[0]].id) +
                                          " do not chain into a fan");
        }

        // walk the chain
        for (size_t step = 0; step < comp.size(); ++step) {
            site.faces.push_back(cur);
            Index next = kNone;
            EdgeId via = -1;
            for (EdgeId e : face_loaded[cur]) {
                for (Index gi : edge_faces[e])
                    if (gi != cur && gi != prev) {
                        if (next == kNone) {
                            next = gi;
                            via = e;
                        } else if (step == 0 && site.star) {
                            // a star start sees both directions; take the lower id
                            if (stage.faces[gi].id < stage.faces[next].id) {
                                next = gi;
                                via = e;
                            }
                        } else if (gi != next) {
                            fail("SkewConfiguration", "branching loaded fan at face " +
                                                          std::to_string(stage.faces[cur].id));
                        }
                    }
            }
            if (step + 1 < comp.size()) {
                if (next == kNone)
                    fail("SkewConfiguration", "loaded fan breaks at face " +
                                                  std::to_string(stage.faces[cur].id));
                site.loaded_edges.push_back(via);
                prev = cur;
                cur = next;
            } else if (site.star) {
                // closing edge back to the start
                EdgeId close = -1;
                for (EdgeId e : face_loaded[cur])
                    if (std::find(site.loaded_edges.begin(), site.loaded_edges.end(), e) ==
                        site.loaded_edges.end())
                        close = e;
                if (close == -1)
                    fail("SkewConfiguration", "loaded star does not close at face " +
                                                  std::to_string(stage.faces[cur].id));
                site.loaded_edges.push_back(close);
            }
        }

        // every fan of >1 loaded edge pivots around one vertex
        if (site.loaded_edges.size() > 1) {
            auto ends_of = [&](EdgeId e) {
                const StageEdge& se = stage.edge(e);
                return std::pair<VertexId, VertexId>{se.v1, se.v2};
            };
            auto [a, b] = ends_of(site.loaded_edges[0]);
            for (EdgeId e : site.loaded_edges) {
                auto [c2, d2] = ends_of(e);
                if (a != c2 && a != d2) a = -1;
                if (b != c2 && b != d2) b = -1;
            }
            if (a == -1 && b == -1)
                fail("SkewConfiguration", "loaded edges of a fan share no common vertex (face " +
                                              std::to_string(stage.faces[site.faces[0]].id) + ")");
        }
        sites.push_back(std::move(site));
    }

    for (size_t fi = 0; fi < nf; ++fi)
        if (face_loaded[fi].empty()) sites.push_back({{static_cast<Index>(fi)}, {}, false});

    std::sort(sites.begin(), sites.end(), [&](const GluingSite& a, const GluingSite& b) {
        auto key = [&](const GluingSite& s) {
            FaceId m = stage.faces[s.faces[0]].id;
            for (Index fi : s.faces) m = std::min(m, stage.faces[fi].id);
            return m;
        };
        return key(a) < key(b);
    });
    return sites;
}

TilingStage grow(const TilingStage& stage, const GluingSpec& spec) {
    auto sites = detect_loaded_fans(spec, stage);

    std::vector<Index> site_of(stage.faces.size(), kNone);
    for (size_t si = 0; si < sites.size(); ++si)
        for (Index fi : sites[si].faces) site_of[fi] = static_cast<Index>(si);

    // every edge gains one adjacent polyhedron per distinct covering site
    std::map<EdgeId, std::vector<Index>> edge_sites;
    for (size_t fi = 0; fi < stage.faces.size(); ++fi)
        for (EdgeId e : stage.faces[fi].edges) edge_sites[e].push_back(site_of[fi]);

    TilingStage out;
    out.stage = stage.stage + 1;
    out.next_vertex = stage.next_vertex;
    out.next_edge = stage.next_edge;
    out.next_face = stage.next_face;
    out.next_instance = stage.next_instance;

    for (const StageEdge& e : stage.edges) {
        const auto& ss = edge_sites[e.id];
        if (ss.size() != 2)
            fail("GluingInconsistency",
                 "edge " + std::to_string(e.id) + " does not border exactly two faces");
        int add = (ss[0] == ss[1]) ? 1 : 2;
        int len = stage.cycle_length(spec, e);
        int cnt = e.count + add;
        if (cnt > len)
            fail("CycleOverflow", "edge " + std::to_string(e.id) + " would reach count " +
                                      std::to_string(cnt) + " of cycle length " +
                                      std::to_string(len));
        if (cnt == len) {
            if (ss[0] != ss[1])
                fail("GluingInconsistency",
                     "edge " + std::to_string(e.id) +
                         " closes its cycle across two distinct sites; spec violates the "
                         "growth hypotheses");
            // buried: dropped from the boundary ledger
        } else {
            StageEdge ne = e;
            ne.count = cnt;
            out.edges.push_back(ne);
        }
    }

    for (const GluingSite& site : sites) {
        Index target = kNone;
        bool reflected = false;
        std::map<Index, VertexId> vmap;  // target template vertex -> global
        std::map<VertexId, Index> vmap_inv;
        std::map<Index, EdgeId> emap;  // target template edge -> global
        std::set<Index> covered;

        for (Index fi : site.faces) {
            const StageFace& f = stage.faces[fi];
            const StageInstance& inst = stage.instance(f.instance);
            const FacePairing& p =
                spec.pairings[spec.pairing_of[inst.tmpl][f.template_face]];
            PairImage img = apply_pairing(spec, inst.tmpl, f.template_face);
            bool refl = inst.reflected ^ p.mirror;
            if (target == kNone) {
                target = img.tmpl;
                reflected = refl;
            } else if (target != img.tmpl || reflected != refl) {
                fail("GluingInconsistency", "fan faces resolve to different templates at face " +
                                                std::to_string(f.id));
            }
            if (!covered.insert(img.face).second)
                fail("GluingInconsistency", "two fan faces cover the same template face (face " +
                                                std::to_string(f.id) + ")");

            auto tcyc = face_template_cycle(spec, stage, f);
            size_t k = tcyc.size();
            const SphericalComplex& tc = spec.templates[target].complex;
            for (size_t i = 0; i < k; ++i) {
                Index tv = img.vertex_map[tcyc[i]];
                VertexId g = f.vertices[i];
                auto [it, fresh] = vmap.emplace(tv, g);
                if (!fresh && it->second != g)
                    fail("GluingInconsistency", "fan vertex maps disagree at face " +
                                                    std::to_string(f.id));
                auto [jt, fresh2] = vmap_inv.emplace(g, tv);
                if (!fresh2 && jt->second != tv)
                    fail("GluingInconsistency", "two template vertices land on one boundary "
                                                "vertex at face " +
                                                    std::to_string(f.id));
                Index te = edge_between(tc, img.vertex_map[tcyc[i]],
                                        img.vertex_map[tcyc[(i + 1) % k]]);
                auto [et, efresh] = emap.emplace(te, f.edges[i]);
                if (!efresh && et->second != f.edges[i])
                    fail("GluingInconsistency",
                         "fan edge maps disagree at face " + std::to_string(f.id));
            }
        }

        const SphericalComplex& tc = spec.templates[target].complex;
        for (Index tv = 0; tv < tc.vertex_count(); ++tv)
            if (!vmap.count(tv)) vmap[tv] = out.next_vertex++;
        for (Index te = 0; te < tc.edge_count(); ++te)
            if (!emap.count(te)) {
                EdgeId id = out.next_edge++;
                emap[te] = id;
                auto [a, b] = tc.edge_endpoints(te);
                VertexId ga = vmap[a], gb = vmap[b];
                out.edges.push_back({id, std::min(ga, gb), std::max(ga, gb),
                                     spec.edge_class_of[target][te], 1});
            }

        Index inst_id = out.next_instance++;
        out.instances.push_back({inst_id, target, reflected});

        for (Index tf = 0; tf < tc.face_count(); ++tf) {
            if (covered.count(tf)) continue;
            StageFace nf;
            nf.id = out.next_face++;
            nf.instance = inst_id;
            nf.template_face = tf;
            auto tcyc = aligned_cycle(spec, target, tf, reflected);
            size_t k = tcyc.size();
            for (size_t i = 0; i < k; ++i) {
                nf.vertices.push_back(vmap[tcyc[i]]);
                nf.edges.push_back(emap[edge_between(tc, tcyc[i], tcyc[(i + 1) % k])]);
            }
            out.faces.push_back(std::move(nf));
        }
    }

    std::sort(out.edges.begin(), out.edges.end(),
              [](const StageEdge& a, const StageEdge& b) { return a.id < b.id; });

    SphericalComplex c;
    try {
        c = to_complex(out);
    } catch (const Error& e) {
        fail("GluingInconsistency", std::string("grown stage is not a valid complex: ") + e.what());
    }
    if (!c.is_sphere())
        fail("GluingInconsistency", "grown stage is not a sphere");
    return out;
}

StageReport verify_stage(const GluingSpec& spec, const TilingStage& stage) {
    StageReport rep;
    auto add = [&](const std::string& name, bool pass, const std::string& wit) {
        rep.checks.push_back({name, pass, wit});
    };

    SphericalComplex c;
    bool built = false;
    try {
        c = to_complex(stage);
        built = true;
        add("sphere", c.is_sphere(), c.is_sphere() ? "" : "complex is not a closed sphere");
    } catch (const Error& e) {
        add("sphere", false, e.what());
    }

    // ledger consistency
    {
        bool ok = true;
        std::string wit;
        std::set<EdgeId> referenced;
        for (const StageFace& f : stage.faces) {
            size_t k = f.vertices.size();
            std::vector<Index> tcyc;
            try {
                tcyc = face_template_cycle(spec, stage, f);
            } catch (const Error& e) {
                ok = false;
                wit = e.what();
                break;
            }
            const StageInstance& inst = stage.instance(f.instance);
            const SphericalComplex& tc = spec.templates[inst.tmpl].complex;
            if (tcyc.size() != k || f.edges.size() != k) {
                ok = false;
                wit = "face " + std::to_string(f.id) + " size mismatch with template";
                break;
            }
            for (size_t i = 0; i < k && ok; ++i) {
                referenced.insert(f.edges[i]);
                const StageEdge* se = nullptr;
                try {
                    se = &stage.edge(f.edges[i]);
                } catch (const Error&) {
                    ok = false;
                    wit = "face " + std::to_string(f.id) + " references missing edge " +
                          std::to_string(f.edges[i]);
                    break;
                }
                VertexId a = f.vertices[i], b = f.vertices[(i + 1) % k];
                if (std::min(a, b) != se->v1 || std::max(a, b) != se->v2) {
                    ok = false;
                    wit = "edge " + std::to_string(se->id) + " endpoints disagree with face " +
                          std::to_string(f.id);
                    break;
                }
                Index te = edge_between(tc, tcyc[i], tcyc[(i + 1) % k]);
                if (te == kNone || spec.edge_class_of[inst.tmpl][te] != se->cls) {
                    ok = false;
                    wit = "edge " + std::to_string(se->id) + " class disagrees with template";
                    break;
                }
            }
            if (!ok) break;
        }
        for (const StageEdge& e : stage.edges) {
            if (!ok) break;
            int len = stage.cycle_length(spec, e);
            if (e.count < 1 || e.count >= len) {
                ok = false;
                wit = "edge " + std::to_string(e.id) + " count " + std::to_string(e.count) +
                      " outside [1, " + std::to_string(len) + ")";
            } else if (!referenced.count(e.id)) {
                ok = false;
                wit = "edge " + std::to_string(e.id) + " borders no face";
            }
        }
        add("ledger", ok, wit);
    }

    // burdened edges of any face: at most two, contiguous
    {
        bool ok = true;
        std::string wit;
        for (const StageFace& f : stage.faces) {
            size_t k = f.edges.size();
            std::vector<size_t> pos;
            for (size_t i = 0; i < k; ++i) {
                const StageEdge& se = stage.edge(f.edges[i]);
                if (stage.status(spec, se) != EdgeStatus::Unburdened) pos.push_back(i);
            }
            if (pos.size() > 2 ||
                (pos.size() == 2 && !(pos[1] == pos[0] + 1 || (pos[0] == 0 && pos[1] == k - 1)))) {
                ok = false;
                wit = "face " + std::to_string(f.id) + " has " + std::to_string(pos.size()) +
                      " burdened edges" + (pos.size() == 2 ? " (non-contiguous)" : "");
                break;
            }
        }
        add("wedge", ok, wit);
    }

    // skew edges: e's own faces carry loaded edges at both endpoints of e,
    // and those loaded edges flank disjoint face pairs (misaligned wedges)
    {
        bool ok = true;
        std::string wit;
        std::map<EdgeId, std::vector<size_t>> efaces;  // face indices
        for (size_t fi = 0; fi < stage.faces.size(); ++fi)
            for (EdgeId e : stage.faces[fi].edges) efaces[e].push_back(fi);
        std::set<EdgeId> loaded;
        for (const StageEdge& e : stage.edges)
            if (stage.status(spec, e) == EdgeStatus::Loaded) loaded.insert(e.id);
        auto touches = [&](EdgeId id, VertexId v) {
            const StageEdge& se = stage.edge(id);
            return se.v1 == v || se.v2 == v;
        };
        for (const StageEdge& e : stage.edges) {
            if (!ok) break;
            std::vector<EdgeId> at_v1, at_v2;
            for (size_t fi : efaces[e.id])
                for (EdgeId x : stage.faces[fi].edges) {
                    if (x == e.id || !loaded.count(x)) continue;
                    if (touches(x, e.v1)) at_v1.push_back(x);
                    if (touches(x, e.v2)) at_v2.push_back(x);
                }
            for (EdgeId a : at_v1) {
                if (!ok) break;
                for (EdgeId b : at_v2) {
                    if (b == a) continue;
                    bool share = false;
                    for (size_t x : efaces[a])
                        for (size_t y : efaces[b])
                            if (x == y) share = true;
                    if (!share) {
                        ok = false;
                        wit = "edge " + std::to_string(e.id) + " is skew (loaded edges " +
                              std::to_string(a) + ", " + std::to_string(b) + ")";
                        break;
                    }
                }
            }
        }
        add("skew", ok, wit);
    }

    // loaded faces group into fans
    {
        bool ok = true;
        std::string wit;
        try {
            detect_loaded_fans(spec, stage);
        } catch (const Error& e) {
            ok = false;
            wit = e.what();
        }
        add("fans", ok, wit);
    }

    (void)built;
    rep.pass = std::all_of(rep.checks.begin(), rep.checks.end(),
                           [](const StageCheck& c2) { return c2.pass; });
    return rep;
}

}  // namespace polysub
