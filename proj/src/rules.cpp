#include "polysub/rules.hpp"

#include <algorithm>
#include <array>
#include <deque>
#include <functional>
#include <map>
#include <numeric>
#include <set>
#include <cstdio>
#include <sstream>

#include "polysub/errors.hpp"

namespace polysub {

namespace {

constexpr int kTypeCap = 500;
constexpr int kPathCap = 16;

int mod(int x, int m) { return ((x % m) + m) % m; }

Index find_face(const TilingStage& s, FaceId id) {
    auto it = std::lower_bound(s.faces.begin(), s.faces.end(), id,
                               [](const StageFace& f, FaceId v) { return f.id < v; });
    if (it == s.faces.end() || it->id != id) fail("GluingInconsistency", "missing face in stage");
    return static_cast<Index>(it - s.faces.begin());
}

bool edge_exists(const TilingStage& s, EdgeId id) {
    auto it = std::lower_bound(s.edges.begin(), s.edges.end(), id,
                               [](const StageEdge& e, EdgeId v) { return e.id < v; });
    return it != s.edges.end() && it->id == id;
}

// ---------------------------------------------------------------------------
// Provenance orbits of (template face, edge on it, mirror bit) flags under the
// symmetries of the whole gluing.  The label of a fan face anchored at a
// specific edge pins which template face attaches there and how it is turned,
// up to symmetries that preserve the gluing; counts do not enter, since the
// patch a site receives never depends on them.

struct FlagTable {
    std::vector<int> offset;  // per template
    std::vector<int> stride;  // edge slots per face of the template
    std::vector<int> label;
    int slot(Index t, Index f, Index e, int r) const {
        return offset[t] + (static_cast<int>(f) * stride[t] + static_cast<int>(e)) * 2 + r;
    }
};

const FlagTable& flag_table(const GluingSpec& spec) {
    static std::map<std::string, FlagTable> cache;
    const std::string h = spec_hash(spec);
    auto hit = cache.find(h);
    if (hit != cache.end()) return hit->second;

    FlagTable t;
    t.offset.assign(spec.templates.size() + 1, 0);
    t.stride.assign(spec.templates.size(), 0);
    for (size_t i = 0; i < spec.templates.size(); ++i) {
        t.stride[i] = spec.templates[i].complex.edge_count();
        t.offset[i + 1] =
            t.offset[i] + 2 * spec.templates[i].complex.face_count() * t.stride[i];
    }
    const int total = t.offset.back();
    std::vector<int> parent(total);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[x] != x) x = parent[x];
        return x;
    };
    for (const SpecAutomorphism& a : spec_automorphisms(spec))
        for (Index ti = 0; ti < static_cast<Index>(spec.templates.size()); ++ti)
            for (Index f = 0; f < spec.templates[ti].complex.face_count(); ++f)
                for (Index e = 0; e < spec.templates[ti].complex.edge_count(); ++e)
                    for (int r = 0; r < 2; ++r) {
                        int x = find(t.slot(ti, f, e, r));
                        int y = find(t.slot(a.tmpl_map[ti], a.iso[ti].face_map[f],
                                            a.iso[ti].edge_map[e],
                                            r ^ (a.iso[ti].reflected ? 1 : 0)));
                        if (x != y) parent[std::max(x, y)] = std::min(x, y);
                    }
    t.label.assign(total, -1);
    int next = 0;
    for (int i = 0; i < total; ++i) {
        int r = find(i);
        if (t.label[r] < 0) t.label[r] = next++;
        t.label[i] = t.label[r];
    }
    return cache.emplace(h, std::move(t)).first->second;
}

// ---------------------------------------------------------------------------
// Canonical site keys.

struct RawEnd {
    char kind = 0;  // 'v' cycle position, 'm' edge position, 'j' junction
    int pos = -1;
    std::int64_t jid = -1;
};

struct FanFaceData {
    const StageFace* f = nullptr;
    const StageInstance* in = nullptr;
    std::vector<Index> tedge;  // template edge behind each raw cycle position
    std::vector<char> mid;     // midpoint flag per raw edge position
    std::vector<std::array<RawEnd, 2>> segs;
};

RawEnd raw_end(const StageFace& f, const Node& n) {
    RawEnd r;
    if (n.kind == 'v') {
        r.kind = 'v';
        auto it = std::find(f.vertices.begin(), f.vertices.end(), n.id);
        r.pos = static_cast<int>(it - f.vertices.begin());
    } else if (n.kind == 'm') {
        r.kind = 'm';
        auto it = std::find(f.edges.begin(), f.edges.end(), n.id);
        r.pos = static_cast<int>(it - f.edges.begin());
    } else {
        r.kind = 'j';
        r.jid = n.id;
    }
    return r;
}

std::string site_key_impl(const GluingSpec& spec, const TilingStage& stage, const Overlay* ov,
                          const GluingSite& site) {
    const FlagTable& flags = flag_table(spec);
    const int k = static_cast<int>(site.faces.size());

    std::vector<FanFaceData> data(k);
    for (int i = 0; i < k; ++i) {
        FanFaceData& d = data[i];
        d.f = &stage.faces[site.faces[i]];
        d.in = &stage.instance(d.f->instance);
        const SphericalComplex& tc = spec.templates[d.in->tmpl].complex;
        std::vector<Index> tv = face_template_cycle(spec, stage, *d.f);
        const int m = static_cast<int>(tv.size());
        for (int p = 0; p < m; ++p) {
            Index te = edge_between(tc, tv[p], tv[(p + 1) % m]);
            if (te == kNone) fail("GluingInconsistency", "stage face off its template");
            d.tedge.push_back(te);
        }
        for (EdgeId eid : d.f->edges)
            d.mid.push_back(ov && ov->midpoints.count(eid) ? 1 : 0);
        if (ov)
            for (const Segment& s : ov->segments)
                if (s.face == d.f->id) d.segs.push_back({raw_end(*d.f, s.a), raw_end(*d.f, s.b)});
    }

    // loaded edge between two fan positions
    std::map<std::pair<int, int>, EdgeId> link;
    for (size_t j = 0; j < site.loaded_edges.size(); ++j) {
        int a = static_cast<int>(j), b = static_cast<int>((j + 1) % site.faces.size());
        link[{std::min(a, b), std::max(a, b)}] = site.loaded_edges[j];
    }

    auto serialize = [&](const std::vector<int>& order, bool mir) {
        std::string out(site.star ? "S" : (k == 1 ? "U" : "C"));
        std::map<std::int64_t, int> jlocal;
        auto emit_face = [&](const FanFaceData& d, int r, bool head) {
            const int m = static_cast<int>(d.f->edges.size());
            auto vser = [&](int raw) { return mir ? mod(r - raw, m) : mod(raw - r, m); };
            auto eser = [&](int raw) { return mir ? mod(r - 1 - raw, m) : mod(raw - r, m); };
            int raw0 = mir ? mod(r - 1, m) : r;
            int rbit = (d.in->reflected ? 1 : 0) ^ (mir ? 1 : 0);
            out += "|F" + std::to_string(flags.label[flags.slot(d.in->tmpl, d.f->template_face,
                                                                d.tedge[raw0], rbit)]);
            if (head) out += "H";
            for (int p = 0; p < m; ++p) {
                int raw = mir ? mod(r - 1 - p, m) : mod(r + p, m);
                out += d.mid[raw] ? ":M" : ":.";
            }
            std::vector<std::string> ss;
            for (const auto& pr : d.segs) {
                std::array<std::string, 2> c;
                for (int q = 0; q < 2; ++q) {
                    const RawEnd& e = pr[q];
                    if (e.kind == 'v')
                        c[q] = "v" + std::to_string(vser(e.pos));
                    else if (e.kind == 'm')
                        c[q] = "m" + std::to_string(eser(e.pos));
                    else {
                        auto it = jlocal.emplace(e.jid, static_cast<int>(jlocal.size())).first;
                        c[q] = "j" + std::to_string(it->second);
                    }
                }
                if (c[1] < c[0]) std::swap(c[0], c[1]);
                ss.push_back(c[0] + "-" + c[1]);
            }
            std::sort(ss.begin(), ss.end());
            for (const std::string& s : ss) out += ";" + s;
        };

        if (k == 1) {
            emit_face(data[order[0]], order[1], false);  // order = {0, rotation}
            return out;
        }
        for (int i = 0; i < k; ++i) {
            const FanFaceData& d = data[order[i]];
            const int m = static_cast<int>(d.f->edges.size());
            bool head = !site.star && i == 0;
            int prev = order[head ? 1 : mod(i - 1, k)];
            auto it = link.find({std::min(order[i], prev), std::max(order[i], prev)});
            if (it == link.end()) fail("GluingInconsistency", "fan faces not linked");
            int raw = static_cast<int>(std::find(d.f->edges.begin(), d.f->edges.end(), it->second) -
                                       d.f->edges.begin());
            int r = mir ? mod(raw + 1, m) : raw;
            emit_face(d, r, head);
        }
        return out;
    };

    std::string best;
    auto consider = [&](const std::vector<int>& order, bool mir) {
        std::string s = serialize(order, mir);
        if (best.empty() || s < best) best = std::move(s);
    };

    if (k == 1) {
        const int m = static_cast<int>(data[0].f->edges.size());
        for (int r = 0; r < m; ++r)
            for (int mir = 0; mir < 2; ++mir) consider({0, r}, mir);
    } else {
        std::vector<int> fwd(k), rev(k);
        std::iota(fwd.begin(), fwd.end(), 0);
        for (int i = 0; i < k; ++i) rev[i] = k - 1 - i;
        std::vector<std::vector<int>> orders;
        if (site.star) {
            for (int s = 0; s < k; ++s) {
                std::vector<int> a(k), b(k);
                for (int i = 0; i < k; ++i) {
                    a[i] = fwd[(s + i) % k];
                    b[i] = rev[(s + i) % k];
                }
                orders.push_back(a);
                orders.push_back(b);
            }
        } else {
            orders = {fwd, rev};
        }
        for (const auto& o : orders)
            for (int mir = 0; mir < 2; ++mir) consider(o, mir);
    }
    return best;
}

// ---------------------------------------------------------------------------
// Patch navigation.

struct PM {
    std::map<VertexId, std::vector<EdgeId>> at_vertex;  // interior edges by endpoint
    std::map<EdgeId, std::vector<FaceId>> faces_of_edge;
    std::map<VertexId, std::vector<FaceId>> faces_of_vertex;
    std::map<FaceId, const StageFace*> face_of;
    std::set<VertexId> interior_vertices;
};

PM make_pm(const PatchView& pv) {
    PM pm;
    const TilingStage& st = *pv.child;
    std::set<VertexId> seen;
    for (Index i : pv.faces) {
        const StageFace& f = st.faces[i];
        pm.face_of[f.id] = &f;
        for (EdgeId e : f.edges) pm.faces_of_edge[e].push_back(f.id);
        for (VertexId v : f.vertices) {
            pm.faces_of_vertex[v].push_back(f.id);
            seen.insert(v);
        }
    }
    for (auto& [v, fs] : pm.faces_of_vertex) {
        std::sort(fs.begin(), fs.end());
        fs.erase(std::unique(fs.begin(), fs.end()), fs.end());
    }
    for (auto& [e, fs] : pm.faces_of_edge) std::sort(fs.begin(), fs.end());
    for (EdgeId e : pv.interior_edges) {
        const StageEdge& ed = st.edge(e);
        pm.at_vertex[ed.v1].push_back(e);
        pm.at_vertex[ed.v2].push_back(e);
    }
    for (auto& [v, es] : pm.at_vertex) std::sort(es.begin(), es.end());
    for (VertexId v : seen)
        if (!pv.boundary_vertices.count(v)) pm.interior_vertices.insert(v);
    return pm;
}

bool on_face(const StageFace& f, VertexId v) {
    return std::find(f.vertices.begin(), f.vertices.end(), v) != f.vertices.end();
}

bool adjacent_on(const StageFace& f, VertexId a, VertexId b) {
    const int m = static_cast<int>(f.vertices.size());
    for (int i = 0; i < m; ++i)
        if ((f.vertices[i] == a && f.vertices[(i + 1) % m] == b) ||
            (f.vertices[i] == b && f.vertices[(i + 1) % m] == a))
            return true;
    return false;
}

void reverse_chain(Chain& c) {
    std::reverse(c.nodes.begin(), c.nodes.end());
    std::reverse(c.items.begin(), c.items.end());
}

PathResult single_chord(Node a, Node b, FaceId host) {
    PathResult r;
    r.chain.nodes = {a, b};
    r.chain.items = {{'s', -1}};
    r.hosts = {host};
    return r;
}

// Shortest edge path between two patch vertices; intermediate vertices stay in
// the patch interior.
PathResult vertex_path(const TilingStage& st, const PM& pm, VertexId a, VertexId b,
                       const std::set<EdgeId>& avoid) {
    PathResult r;
    r.chain.nodes.push_back({'v', a});
    if (a == b) return r;
    std::map<VertexId, int> dist;
    std::deque<VertexId> q{b};
    dist[b] = 0;
    while (!q.empty()) {
        VertexId v = q.front();
        q.pop_front();
        if (v != b && !pm.interior_vertices.count(v)) continue;  // can't pass through boundary
        auto it = pm.at_vertex.find(v);
        if (it == pm.at_vertex.end()) continue;
        for (EdgeId e : it->second) {
            if (avoid.count(e)) continue;
            const StageEdge& ed = st.edge(e);
            VertexId w = ed.v1 == v ? ed.v2 : ed.v1;
            if (!dist.emplace(w, dist[v] + 1).second) continue;
            q.push_back(w);
        }
    }
    if (!dist.count(a))
        fail("PathNotFound", "no interior edge path " + std::to_string(a) + "->" + std::to_string(b));
    VertexId cur = a;
    while (cur != b) {
        int dc = dist[cur];
        bool moved = false;
        for (EdgeId e : pm.at_vertex.at(cur)) {  // ascending ids: lexicographic tie-break
            if (avoid.count(e)) continue;
            const StageEdge& ed = st.edge(e);
            VertexId w = ed.v1 == cur ? ed.v2 : ed.v1;
            if (w != b && !pm.interior_vertices.count(w)) continue;
            auto it = dist.find(w);
            if (it == dist.end() || it->second != dc - 1) continue;
            r.chain.items.push_back({'e', e});
            r.hosts.push_back(-1);
            r.chain.nodes.push_back({'v', w});
            cur = w;
            moved = true;
            break;
        }
        if (!moved) fail("PathNotFound", "edge path reconstruction failed");
    }
    return r;
}

// Chord route through midpoints of pairwise-disjoint interior edges; no face
// crossed twice, boundary faces only at the ends.  Iterative deepening keeps
// the result shortest, candidate order makes it lexicographic.
struct MidSearch {
    const TilingStage& st;
    const PatchView& pv;
    const PM& pm;
    const std::set<FaceId>& avoid_faces;
    const std::set<EdgeId>& avoid_edges;
    Node target;
    bool loose = false;  // admit boundary faces for middle chords
    bool relax = false;  // admit midpoints of edges sharing a vertex
    std::vector<Node> nodes;
    std::vector<FaceId> hosts;
    std::set<FaceId> pfaces;
    std::set<VertexId> everts;
    // when set, a face in avoid_faces may still host the chord a-b
    std::function<bool(FaceId, const Node&, const Node&)> share;

    bool enter_ok(FaceId F, const Node& a, const Node& b) const {
        return !avoid_faces.count(F) || (share && share(F, a, b));
    }

    std::vector<FaceId> faces_at(const Node& n) const {
        if (n.kind == 'v') {
            auto it = pm.faces_of_vertex.find(n.id);
            return it == pm.faces_of_vertex.end() ? std::vector<FaceId>{} : it->second;
        }
        auto it = pm.faces_of_edge.find(n.id);
        return it == pm.faces_of_edge.end() ? std::vector<FaceId>{} : it->second;
    }

    bool can_finish(FaceId F, const Node& cur) const {
        const StageFace& f = *pm.face_of.at(F);
        if (target.kind == 'v') {
            if (!on_face(f, target.id)) return false;
            if (cur.kind == 'v' && (cur.id == target.id || adjacent_on(f, cur.id, target.id)))
                return false;
            return true;
        }
        if (cur.kind == 'm' && cur.id == target.id) return false;
        return std::find(f.edges.begin(), f.edges.end(), target.id) != f.edges.end();
    }

    bool dfs(Node cur, int budget) {
        bool first = nodes.size() == 1;
        for (FaceId F : faces_at(cur)) {
            if (pfaces.count(F) || !enter_ok(F, cur, target)) continue;
            if (can_finish(F, cur)) {
                nodes.push_back(target);
                hosts.push_back(F);
                return true;
            }
        }
        if (budget <= 1) return false;
        for (FaceId F : faces_at(cur)) {
            if (pfaces.count(F)) continue;
            if (!loose && pv.boundary_faces.count(F) && !first) continue;
            const StageFace& f = *pm.face_of.at(F);
            std::vector<EdgeId> cand(f.edges.begin(), f.edges.end());
            std::sort(cand.begin(), cand.end());
            for (EdgeId e : cand) {
                if (!pv.interior_edges.count(e)) continue;
                if (avoid_edges.count(e)) continue;
                if (cur.kind == 'm' && cur.id == e) continue;
                if (!enter_ok(F, cur, {'m', e})) continue;
                const StageEdge& ed = st.edge(e);
                if (!relax && (everts.count(ed.v1) || everts.count(ed.v2))) continue;
                nodes.push_back({'m', e});
                hosts.push_back(F);
                pfaces.insert(F);
                bool n1 = everts.insert(ed.v1).second;
                bool n2 = everts.insert(ed.v2).second;
                if (dfs({'m', e}, budget - 1)) return true;
                nodes.pop_back();
                hosts.pop_back();
                pfaces.erase(F);
                if (n1) everts.erase(ed.v1);
                if (n2) everts.erase(ed.v2);
            }
        }
        return false;
    }
};

PathResult midpoint_path(const TilingStage& st, const PatchView& pv, const PM& pm, Node from,
                         Node to, const std::set<FaceId>& avoid_faces,
                         const std::set<EdgeId>& avoid_edges, bool allow_loose = true,
                         std::function<bool(FaceId, const Node&, const Node&)> share = {},
                         bool allow_relax = false) {
    MidSearch ms{st, pv, pm, avoid_faces, avoid_edges, to};
    ms.nodes = {from};
    ms.share = std::move(share);
    if (from.kind == 'm') {
        const StageEdge& ed = st.edge(from.id);
        ms.everts.insert(ed.v1);
        ms.everts.insert(ed.v2);
    }
    if (to.kind == 'm') {
        const StageEdge& ed = st.edge(to.id);
        ms.everts.insert(ed.v1);
        ms.everts.insert(ed.v2);
    }
    // preference order: disjoint edges through interior faces, then boundary
    // faces, then midpoints of adjacent edges as a last resort
    for (int mode = 0; mode < 4; ++mode) {
        ms.loose = mode & 1;
        ms.relax = mode & 2;
        if (ms.loose && !allow_loose) continue;
        if (ms.relax && !allow_relax) continue;
        for (int budget = 1; budget <= kPathCap; ++budget) {
            ms.nodes = {from};
            ms.hosts.clear();
            ms.pfaces.clear();
            if (ms.dfs(from, budget)) {
                PathResult r;
                r.chain.nodes = ms.nodes;
                for (FaceId h : ms.hosts) {
                    r.chain.items.push_back({'s', -1});
                    r.hosts.push_back(h);
                }
                return r;
            }
        }
    }
    fail("PathNotFound", "no midpoint route");
}

}  // namespace

const Segment& Overlay::segment(std::int64_t id) const {
    auto it = std::lower_bound(segments.begin(), segments.end(), id,
                               [](const Segment& s, std::int64_t v) { return s.id < v; });
    if (it == segments.end() || it->id != id) fail("GluingInconsistency", "unknown segment id");
    return *it;
}

std::string fan_type_key(const GluingSpec& spec, const TilingStage& stage, const GluingSite& site) {
    return site_key_impl(spec, stage, nullptr, site);
}

std::string tile_type_key(const GluingSpec& spec, const DecoratedStage& d, const GluingSite& site) {
    return site_key_impl(spec, d.stage, &d.overlay, site);
}

PatchView patch_view(const TilingStage& child, Index instance) {
    PatchView p;
    p.child = &child;
    p.instance = instance;
    std::map<EdgeId, int> cnt;
    for (Index i = 0; i < static_cast<Index>(child.faces.size()); ++i)
        if (child.faces[i].instance == instance) {
            p.faces.push_back(i);
            for (EdgeId e : child.faces[i].edges) cnt[e]++;
        }
    for (auto [e, c] : cnt) (c == 2 ? p.interior_edges : p.boundary_edges).insert(e);
    for (EdgeId e : p.boundary_edges) {
        const StageEdge& ed = child.edge(e);
        p.boundary_vertices.insert(ed.v1);
        p.boundary_vertices.insert(ed.v2);
    }
    for (Index i : p.faces)
        for (EdgeId e : child.faces[i].edges)
            if (p.boundary_edges.count(e)) {
                p.boundary_faces.insert(child.faces[i].id);
                break;
            }
    return p;
}

PathResult interior_path(const PatchView& patch, Node from, Node to, PathMode mode,
                         const std::set<FaceId>& avoid_faces, const std::set<EdgeId>& avoid_edges) {
    PM pm = make_pm(patch);
    if (mode == PathMode::VertexEdges) {
        if (from.kind != 'v' || to.kind != 'v')
            fail("PathNotFound", "vertex-edges mode needs vertex endpoints");
        return vertex_path(*patch.child, pm, from.id, to.id, avoid_edges);
    }
    if (mode == PathMode::MidpointDisjoint && (from.kind != 'm' || to.kind != 'm'))
        fail("PathNotFound", "midpoint-disjoint mode needs midpoint endpoints");
    return midpoint_path(*patch.child, patch, pm, from, to, avoid_faces, avoid_edges);
}

// ---------------------------------------------------------------------------
// Per-site subdivision construction.

namespace {

struct SiteWork {
    const GluingSpec& spec;
    const TilingStage& parent;
    TilingStage& child;
    Overlay& out;
    const GluingSite& site;
    PatchView pv;
    PM pm;
    std::set<FaceId> used_faces;
    std::set<EdgeId> used_edges;
    std::set<VertexId> used_verts;
    std::map<FaceId, std::vector<std::pair<Node, Node>>> face_chords;  // placed chords per face
    std::vector<EdgeId> mid_journal;  // midpoints added by this site (rollback)
    std::vector<Chain> chains;
    int added_segments = 0;
    int added_junctions = 0;
    bool ok = true;
    std::string why;

    void flag(const std::string& w) {
        if (ok) why = w;
        ok = false;
    }

    std::set<EdgeId> mid_avoid() const {
        std::set<EdgeId> a = used_edges;
        for (EdgeId e : out.midpoints) a.insert(e);
        return a;
    }
    std::set<EdgeId> vert_avoid() const {
        std::set<EdgeId> a = mid_avoid();
        for (VertexId v : used_verts) {
            auto it = pm.at_vertex.find(v);
            if (it != pm.at_vertex.end())
                for (EdgeId e : it->second) a.insert(e);
        }
        return a;
    }

    // a used face may host one more chord when it crosses none of the chords
    // already placed there; faces holding a junction stay exclusive
    bool share_ok(FaceId F, const Node& a, const Node& b) const {
        auto it = face_chords.find(F);
        if (it == face_chords.end()) return true;
        const StageFace& f = *pm.face_of.at(F);
        int k = static_cast<int>(f.vertices.size());
        auto pos = [&](const Node& n) -> int {  // boundary circle position, -1 if off it
            if (n.kind == 'v') {
                for (int i = 0; i < k; ++i)
                    if (f.vertices[i] == n.id) return 2 * i;
            } else if (n.kind == 'm') {
                for (int i = 0; i < k; ++i)
                    if (f.edges[i] == n.id) return 2 * i + 1;
            }
            return -1;
        };
        int a1 = pos(a), a2 = pos(b);
        if (a1 < 0 || a2 < 0 || a1 == a2) return false;
        auto inside = [&](int lo, int hi, int x) {  // strictly between, counterclockwise
            return lo < hi ? x > lo && x < hi : x > lo || x < hi;
        };
        for (const auto& [p, q] : it->second) {
            int b1 = pos(p), b2 = pos(q);
            if (b1 < 0 || b2 < 0) return false;  // junction chord: keep the face exclusive
            if ((b1 == a1 && b2 == a2) || (b1 == a2 && b2 == a1)) return false;  // same chord
            // chords sharing one boundary point fan out and never cross
            if (b1 == a1 || b1 == a2 || b2 == a1 || b2 == a2) continue;
            if (inside(a1, a2, b1) != inside(a1, a2, b2)) return false;  // they cross
        }
        return true;
    }

    std::function<bool(FaceId, const Node&, const Node&)> sharer() {
        return [this](FaceId F, const Node& a, const Node& b) { return share_ok(F, a, b); };
    }

    Chain materialize(const PathResult& pr) {
        Chain c = pr.chain;
        for (size_t i = 0; i < c.items.size(); ++i) {
            if (c.items[i].kind == 's' && c.items[i].id < 0) {
                std::int64_t id = out.next_segment++;
                c.items[i].id = id;
                out.segments.push_back({id, pr.hosts[i], c.nodes[i], c.nodes[i + 1]});
                ++added_segments;
            } else if (c.items[i].kind == 'e') {
                used_edges.insert(c.items[i].id);
            }
        }
        for (size_t i = 0; i < c.nodes.size(); ++i) {
            const Node& n = c.nodes[i];
            if (n.kind == 'm' && out.midpoints.insert(n.id).second) mid_journal.push_back(n.id);
            bool endpoint = i == 0 || i + 1 == c.nodes.size();
            if (!endpoint) {
                if (n.kind == 'v') used_verts.insert(n.id);
                if (n.kind == 'm') used_edges.insert(n.id);
            }
        }
        for (size_t i = 0; i < c.items.size(); ++i)
            if (c.items[i].kind == 's') {
                used_faces.insert(pr.hosts[i]);
                face_chords[pr.hosts[i]].push_back({c.nodes[i], c.nodes[i + 1]});
            }
        chains.push_back(c);
        return c;
    }
};

// Vertex-to-vertex route: existing interior edge (if allowed), direct chord,
// or chords to interior vertices joined by an edge path.
Chain chord_path(SiteWork& w, VertexId a, VertexId b, bool allow_edge) {
    const TilingStage& st = w.child;
    if (allow_edge) {
        auto it = w.pm.at_vertex.find(a);
        if (it != w.pm.at_vertex.end())
            for (EdgeId e : it->second) {
                if (w.used_edges.count(e) || w.out.midpoints.count(e)) continue;
                const StageEdge& ed = st.edge(e);
                if ((ed.v1 == a ? ed.v2 : ed.v1) == b) {
                    PathResult pr;
                    pr.chain.nodes = {{'v', a}, {'v', b}};
                    pr.chain.items = {{'e', e}};
                    pr.hosts = {-1};
                    return w.materialize(pr);
                }
            }
    }
    auto fit = w.pm.faces_of_vertex.find(a);
    if (fit != w.pm.faces_of_vertex.end())
        for (FaceId F : fit->second) {
            if (w.used_faces.count(F) && !w.share_ok(F, {'v', a}, {'v', b})) continue;
            const StageFace& f = *w.pm.face_of.at(F);
            if (on_face(f, b) && !adjacent_on(f, a, b) && a != b)
                return w.materialize(single_chord({'v', a}, {'v', b}, F));
        }

    auto anchors = [&](VertexId v) {
        std::vector<std::pair<FaceId, VertexId>> r;
        if (w.pm.interior_vertices.count(v)) {
            r.push_back({-1, v});
            return r;
        }
        auto it = w.pm.faces_of_vertex.find(v);
        if (it == w.pm.faces_of_vertex.end()) return r;
        for (FaceId F : it->second) {
            const StageFace& f = *w.pm.face_of.at(F);
            std::vector<VertexId> vs(f.vertices.begin(), f.vertices.end());
            std::sort(vs.begin(), vs.end());
            for (VertexId x : vs)
                if (w.pm.interior_vertices.count(x) && !w.used_verts.count(x) && x != v &&
                    !adjacent_on(f, v, x) &&
                    (!w.used_faces.count(F) || w.share_ok(F, {'v', v}, {'v', x})))
                    r.push_back({F, x});
        }
        return r;
    };

    std::set<EdgeId> avoid = w.vert_avoid();
    PathResult best;
    bool have = false;
    for (auto [F1, x1] : anchors(a))
        for (auto [F2, x2] : anchors(b)) {
            if (F1 != -1 && F1 == F2 && x1 != x2) continue;
            if (F1 != -1 && x1 == b) continue;
            if (F2 != -1 && x2 == a) continue;
            try {
                PathResult mid = vertex_path(st, w.pm, x1, x2, avoid);
                PathResult full;
                if (F1 != -1) {
                    full.chain.nodes.push_back({'v', a});
                    full.chain.items.push_back({'s', -1});
                    full.hosts.push_back(F1);
                }
                full.chain.nodes.insert(full.chain.nodes.end(), mid.chain.nodes.begin(),
                                        mid.chain.nodes.end());
                full.chain.items.insert(full.chain.items.end(), mid.chain.items.begin(),
                                        mid.chain.items.end());
                full.hosts.insert(full.hosts.end(), mid.hosts.begin(), mid.hosts.end());
                if (F2 != -1) {
                    full.chain.items.push_back({'s', -1});
                    full.hosts.push_back(F2);
                    full.chain.nodes.push_back({'v', b});
                }
                if (!have || full.chain.items.size() < best.chain.items.size()) {
                    best = std::move(full);
                    have = true;
                }
            } catch (const Error&) {
                continue;
            }
        }
    if (!have)
        fail("PathNotFound", "no route between boundary vertices v" + std::to_string(a) + "(" +
                                 std::to_string(anchors(a).size()) + " anchors) v" +
                                 std::to_string(b) + "(" + std::to_string(anchors(b).size()) +
                                 " anchors), " + std::to_string(w.pm.interior_vertices.size()) +
                                 " interior vertices");
    return w.materialize(best);
}

struct WorkSnap {
    size_t nseg, njun, nchain, nmids;
    std::int64_t next_seg, next_jun;
    std::set<FaceId> used_faces;
    std::set<EdgeId> used_edges;
    std::set<VertexId> used_verts;
    std::map<FaceId, std::vector<std::pair<Node, Node>>> face_chords;
    int added_s, added_j;
    bool ok;
    std::string why;
};

WorkSnap snap(const SiteWork& w) {
    return {w.out.segments.size(), w.out.junctions.size(), w.chains.size(), w.mid_journal.size(),
            w.out.next_segment,    w.out.next_junction,    w.used_faces,    w.used_edges,
            w.used_verts,          w.face_chords,          w.added_segments, w.added_junctions,
            w.ok,                  w.why};
}

void restore(SiteWork& w, const WorkSnap& s) {
    w.out.segments.resize(s.nseg);
    w.out.junctions.resize(s.njun);
    w.out.next_segment = s.next_seg;
    w.out.next_junction = s.next_jun;
    for (size_t i = s.nmids; i < w.mid_journal.size(); ++i) w.out.midpoints.erase(w.mid_journal[i]);
    w.mid_journal.resize(s.nmids);
    w.chains.resize(s.nchain);
    w.used_faces = s.used_faces;
    w.used_edges = s.used_edges;
    w.used_verts = s.used_verts;
    w.face_chords = s.face_chords;
    w.added_segments = s.added_s;
    w.added_junctions = s.added_j;
    w.ok = s.ok;
    w.why = s.why;
}

struct JunctionTask {
    Node outer;
    bool midpoint_style = false;
};

struct JunctionResult {
    FaceId T = -1;
    std::int64_t j = -1;
    std::vector<Chain> chains;  // parallel to tasks, each from outer to the junction
};

bool route_to_junction(SiteWork& w, const Node& outer, bool midpoint_style, bool loose, bool relax,
                       FaceId T, std::int64_t j, std::set<EdgeId>& entry_edges,
                       std::set<VertexId>& entry_verts, Chain& result, bool verbose = false) {
    const StageFace& tf = *w.pm.face_of.at(T);
    const Node jn{'j', j};
    if (outer.kind == 'v' && on_face(tf, outer.id) && !entry_verts.count(outer.id) &&
        !w.used_verts.count(outer.id)) {
        result = w.materialize(single_chord(outer, jn, T));
        entry_verts.insert(outer.id);
        return true;
    }
    if (outer.kind == 'm' &&
        std::find(tf.edges.begin(), tf.edges.end(), outer.id) != tf.edges.end() &&
        !entry_edges.count(outer.id)) {
        result = w.materialize(single_chord(outer, jn, T));
        entry_edges.insert(outer.id);
        return true;
    }
    // the junction face itself must stay clear of passing chords
    auto share_not_T = [&w, T](FaceId F, const Node& a, const Node& b) {
        return F != T && w.share_ok(F, a, b);
    };
    if (midpoint_style) {
        std::vector<EdgeId> cand(tf.edges.begin(), tf.edges.end());
        std::sort(cand.begin(), cand.end());
        std::set<FaceId> af = w.used_faces;
        af.insert(T);
        std::set<EdgeId> ae = w.mid_avoid();
        for (EdgeId e : cand) {
            if (!w.pv.interior_edges.count(e) || entry_edges.count(e) || ae.count(e)) {
                if (verbose)
                    std::fprintf(stderr, "DBG rtj %c%lld mstyle e=%lld skip int=%d ent=%d ae=%d\n",
                                 outer.kind, (long long)outer.id, (long long)e,
                                 (int)w.pv.interior_edges.count(e), (int)entry_edges.count(e),
                                 (int)ae.count(e));
                continue;
            }
            try {
                // edges of the junction face are entry slots for other lines;
                // keep them free of intermediate midpoints
                std::set<EdgeId> ae2 = ae;
                for (EdgeId o : tf.edges)
                    if (o != e) ae2.insert(o);
                PathResult pr = midpoint_path(w.child, w.pv, w.pm, outer, {'m', e}, af, ae2, loose,
                                              share_not_T, relax);
                pr.chain.nodes.push_back(jn);
                pr.chain.items.push_back({'s', -1});
                pr.hosts.push_back(T);
                result = w.materialize(pr);
                entry_edges.insert(e);
                return true;
            } catch (const Error&) {
                if (verbose)
                    std::fprintf(stderr, "DBG rtj %c%lld mstyle e=%lld no path\n", outer.kind,
                                 (long long)outer.id, (long long)e);
                continue;
            }
        }
        return false;
    }
    // vertex style: edge path into a vertex of the junction face, with a lead-in
    // chord when the line starts at a midpoint
    std::vector<std::pair<FaceId, VertexId>> starts;
    if (outer.kind == 'v') {
        starts.push_back({-1, outer.id});
        // boundary vertices may lack interior edges; lead in with a chord
        auto it = w.pm.faces_of_vertex.find(outer.id);
        if (it != w.pm.faces_of_vertex.end())
            for (FaceId F : it->second) {
                if (F == T) continue;
                const StageFace& f = *w.pm.face_of.at(F);
                std::vector<VertexId> vs(f.vertices.begin(), f.vertices.end());
                std::sort(vs.begin(), vs.end());
                for (VertexId x : vs)
                    if (w.pm.interior_vertices.count(x) && !w.used_verts.count(x) &&
                        x != outer.id && !adjacent_on(f, outer.id, x) &&
                        (!w.used_faces.count(F) || w.share_ok(F, outer, {'v', x})))
                        starts.push_back({F, x});
            }
    } else if (outer.kind == 'm') {
        auto it = w.pm.faces_of_edge.find(outer.id);
        if (it != w.pm.faces_of_edge.end())
            for (FaceId F : it->second) {
                if (F == T) continue;
                const StageFace& f = *w.pm.face_of.at(F);
                std::vector<VertexId> vs(f.vertices.begin(), f.vertices.end());
                std::sort(vs.begin(), vs.end());
                for (VertexId x : vs)
                    if (w.pm.interior_vertices.count(x) && !w.used_verts.count(x) &&
                        (!w.used_faces.count(F) || w.share_ok(F, outer, {'v', x})))
                        starts.push_back({F, x});
            }
    } else {
        return false;
    }
    std::vector<VertexId> tverts(tf.vertices.begin(), tf.vertices.end());
    std::sort(tverts.begin(), tverts.end());
    // the junction face's cells are entry slots for other lines; paths may
    // only touch them at their entry vertex
    std::set<EdgeId> avoid = w.vert_avoid();
    for (EdgeId e : tf.edges) avoid.insert(e);
    if (verbose) {
        int freet = 0;
        for (VertexId t : tverts)
            if (!entry_verts.count(t) && !w.used_verts.count(t)) ++freet;
        std::fprintf(stderr, "DBG rtj %c%lld vstyle starts=%zu free_tverts=%d\n", outer.kind,
                     (long long)outer.id, starts.size(), freet);
    }
    for (VertexId t : tverts) {
        if (entry_verts.count(t) || w.used_verts.count(t)) continue;
        for (auto [F0, x] : starts) {
            if (x == t && F0 == -1) continue;
            try {
                PathResult mid = vertex_path(w.child, w.pm, x, t, avoid);
                bool through_T = false;
                for (size_t i = 1; i + 1 < mid.chain.nodes.size(); ++i)
                    if (on_face(tf, mid.chain.nodes[i].id)) through_T = true;
                if (through_T) continue;
                PathResult full;
                if (F0 != -1) {
                    full.chain.nodes.push_back(outer);
                    full.chain.items.push_back({'s', -1});
                    full.hosts.push_back(F0);
                }
                full.chain.nodes.insert(full.chain.nodes.end(), mid.chain.nodes.begin(),
                                        mid.chain.nodes.end());
                full.chain.items.insert(full.chain.items.end(), mid.chain.items.begin(),
                                        mid.chain.items.end());
                full.hosts.insert(full.hosts.end(), mid.hosts.begin(), mid.hosts.end());
                full.chain.items.push_back({'s', -1});
                full.hosts.push_back(T);
                full.chain.nodes.push_back(jn);
                result = w.materialize(full);
                entry_verts.insert(t);
                return true;
            } catch (const Error&) {
                continue;
            }
        }
    }
    return false;
}

bool try_place_junction(SiteWork& w, const std::vector<JunctionTask>& tasks, JunctionResult& jr,
                        bool verbose = false) {
    std::vector<FaceId> cands;
    for (Index i : w.pv.faces) {
        FaceId F = w.child.faces[i].id;
        if (!w.used_faces.count(F)) cands.push_back(F);
    }
    std::stable_sort(cands.begin(), cands.end(), [&](FaceId a, FaceId b) {
        bool ba = w.pv.boundary_faces.count(a) != 0, bb = w.pv.boundary_faces.count(b) != 0;
        return ba != bb ? !ba : a < b;
    });
    // tasks whose end touches few patch faces get first pick of the room
    std::vector<size_t> order(tasks.size());
    std::iota(order.begin(), order.end(), size_t{0});
    auto scarcity = [&](const JunctionTask& t) -> size_t {
        if (t.outer.kind == 'v') {
            auto it = w.pm.faces_of_vertex.find(t.outer.id);
            return it == w.pm.faces_of_vertex.end() ? 0 : it->second.size();
        }
        if (t.outer.kind == 'm') {
            auto it = w.pm.faces_of_edge.find(t.outer.id);
            return it == w.pm.faces_of_edge.end() ? 0 : it->second.size();
        }
        return tasks.size() + 1;
    };
    std::stable_sort(order.begin(), order.end(),
                     [&](size_t a, size_t b) { return scarcity(tasks[a]) < scarcity(tasks[b]); });
    for (bool relax : {false, true})
    for (bool loose : {false, true})
        for (FaceId T : cands) {
            WorkSnap s = snap(w);
            std::int64_t j = w.out.next_junction++;
            w.out.junctions.push_back({j, T});
            ++w.added_junctions;
            std::set<EdgeId> ee;
            std::set<VertexId> ev;
            std::vector<Chain> chains(tasks.size());
            bool ok = true;
            for (size_t k : order) {
                const JunctionTask& t = tasks[k];
                Chain c;
                // either chain style yields a valid image; fall back to the other
                if (!route_to_junction(w, t.outer, t.midpoint_style, loose, relax, T, j, ee, ev, c,
                                       verbose) &&
                    !route_to_junction(w, t.outer, !t.midpoint_style, loose, relax, T, j, ee, ev, c,
                                       verbose)) {
                    if (verbose)
                        std::fprintf(stderr, "DBG jun T=%lld loose=%d stuck at %c%lld ms=%d\n",
                                     (long long)T, (int)loose, t.outer.kind, (long long)t.outer.id,
                                     (int)t.midpoint_style);
                    ok = false;
                    break;
                }
                chains[k] = std::move(c);
            }
            if (ok) {
                w.used_faces.insert(T);
                jr = {T, j, std::move(chains)};
                return true;
            }
            restore(w, s);
        }
    return false;
}

Node other_end(const Segment& s, const Node& n) { return s.a == n ? s.b : s.a; }

bool touches(const Segment& s, const Node& n) { return s.a == n || s.b == n; }

Node image_node(const StepEmbedding& emb, const Node& n) {
    if (n.kind == 'v') {
        auto it = emb.vertex_image.find(n.id);
        return it == emb.vertex_image.end() ? n : it->second;
    }
    if (n.kind == 'm') {
        auto it = emb.midpoint_image.find(n.id);
        return it == emb.midpoint_image.end() ? n : it->second;
    }
    auto it = emb.junction_image.find(n.id);
    if (it == emb.junction_image.end()) fail("GluingInconsistency", "junction without image");
    return it->second;
}

Chain oriented(SiteWork& w, Chain c, const Node& front) {
    if (!(c.nodes.front() == front)) reverse_chain(c);
    if (!(c.nodes.front() == front)) w.flag("chain orientation mismatch");
    return c;
}

struct SiteOutcome {
    std::string tag;
    int decorations = 0;
};

void process_site_attempt(SiteWork& w, SubdivisionMethod method, const Overlay& pov,
                          StepEmbedding& emb, SiteOutcome& outc, bool passengers_first,
                          bool vertex_lines_first) {
    const TilingStage& P = w.parent;
    const GluingSite& site = w.site;
    std::set<FaceId> fan_ids;
    for (Index idx : site.faces) fan_ids.insert(P.faces[idx].id);
    std::vector<const Segment*> segs;
    for (const Segment& s : pov.segments)
        if (fan_ids.count(s.face)) segs.push_back(&s);
    std::vector<const Junction*> juns;
    for (const Junction& j : pov.junctions)
        if (fan_ids.count(j.face)) juns.push_back(&j);
    outc.decorations = static_cast<int>(segs.size());
    std::fprintf(stderr, "DBG attempt pf=%d segs=%zu juns=%zu loaded=%zu uf=%zu ue=%zu\n",
                 (int)passengers_first, segs.size(), juns.size(), site.loaded_edges.size(),
                 w.used_faces.size(), w.used_edges.size());
    std::set<std::int64_t> done;

    const bool single = site.loaded_edges.empty();
    VertexId center = -1;
    if (site.star) {
        std::set<VertexId> cand;
        const StageEdge& e0 = P.edge(site.loaded_edges[0]);
        cand = {e0.v1, e0.v2};
        for (EdgeId eid : site.loaded_edges) {
            const StageEdge& e = P.edge(eid);
            std::set<VertexId> keep;
            if (cand.count(e.v1)) keep.insert(e.v1);
            if (cand.count(e.v2)) keep.insert(e.v2);
            cand = keep;
        }
        if (cand.size() != 1) w.flag("ambiguous star center");
        if (cand.empty()) fail("GluingInconsistency", "loaded star without common vertex");
        center = *cand.begin();
    }
    auto outer_of = [&](const StageEdge& e) { return e.v1 == center ? e.v2 : e.v1; };

    // lines whose routing the method dispatch below claims for itself
    std::set<std::int64_t> claimed;
    for (const Segment* s : segs) {
        if (site.star && touches(*s, {'v', center})) claimed.insert(s->id);
        if (!single && !site.star)
            for (EdgeId eid : site.loaded_edges)
                if (touches(*s, {'m', eid})) claimed.insert(s->id);
        for (const Junction* jp : juns)
            if (touches(*s, {'j', jp->id})) claimed.insert(s->id);
    }
    // decoration lines whose endpoint images persist; routed before the buried
    // cells when the default order runs out of room
    auto route_passengers = [&]() {
        // faces at the endpoints of still-unrouted loaded edges stay free when
        // possible, or the edge routes below may be starved of their only face
        std::set<FaceId> protect;
        for (EdgeId eid : site.loaded_edges) {
            if (emb.edge_image.count(eid)) continue;
            const StageEdge& E = P.edge(eid);
            for (VertexId v : {E.v1, E.v2}) {
                auto it = w.pm.faces_of_vertex.find(v);
                if (it != w.pm.faces_of_vertex.end())
                    for (FaceId F : it->second) protect.insert(F);
            }
        }
        // an endpoint may sit on a cell that is buried this step and not yet
        // re-imaged; leave such lines for the final pass
        auto present = [&](const Node& n) {
            if (n.kind == 'v') return w.pm.faces_of_vertex.count(n.id) != 0;
            if (n.kind == 'm') return w.pm.faces_of_edge.count(n.id) != 0;
            return false;
        };
        std::vector<const Segment*> order = segs;
        if (vertex_lines_first) {
            // lines pinned to a patch-boundary vertex compete for the scarce
            // faces there; give them first pick of the corridors
            std::stable_partition(order.begin(), order.end(), [&](const Segment* s) {
                return image_node(emb, s->a).kind == 'v' || image_node(emb, s->b).kind == 'v';
            });
        }
        for (const Segment* s : order) {
            if (done.count(s->id) || claimed.count(s->id)) continue;
            Node a = image_node(emb, s->a), b = image_node(emb, s->b);
            if (!present(a) || !present(b)) continue;
            std::fprintf(stderr, "DBG passenger s%lld face=%lld a=%c%lld b=%c%lld protect=%zu\n",
                         (long long)s->id, (long long)s->face, a.kind, (long long)a.id, b.kind,
                         (long long)b.id, protect.size());
            Chain c;
            bool routed = false;
            if (a.kind == 'v' && b.kind == 'v') {
                c = chord_path(w, a.id, b.id, true);
                routed = true;
            }
            if (!routed && !protect.empty()) {
                std::set<FaceId> af = w.used_faces;
                af.insert(protect.begin(), protect.end());
                try {
                    c = w.materialize(midpoint_path(w.child, w.pv, w.pm, a, b, af, w.mid_avoid()));
                    routed = true;
                } catch (const Error&) {
                }
            }
            if (!routed) {
                try {
                    c = w.materialize(midpoint_path(w.child, w.pv, w.pm, a, b, w.used_faces,
                                                    w.mid_avoid(), true, w.sharer(), true));
                } catch (const Error&) {
                    std::fprintf(stderr, "DBG carried fail s%lld a=%c%lld b=%c%lld\n",
                                 (long long)s->id, a.kind, (long long)a.id, b.kind, (long long)b.id);
                    for (Index i : w.pv.faces) {
                        const StageFace& f = w.child.faces[i];
                        std::fprintf(stderr, "  f%lld:", (long long)f.id);
                        for (VertexId v : f.vertices) std::fprintf(stderr, " %lld", (long long)v);
                        std::fprintf(stderr, " |");
                        for (EdgeId e : f.edges)
                            std::fprintf(stderr, " %lld%s%s", (long long)e,
                                         w.used_edges.count(e) ? "u" : "",
                                         w.out.midpoints.count(e) ? "m" : "");
                        std::fprintf(stderr, "%s\n", w.used_faces.count(f.id) ? " *" : "");
                        auto fc = w.face_chords.find(f.id);
                        if (fc != w.face_chords.end())
                            for (auto& [p, q] : fc->second)
                                std::fprintf(stderr, "    chord %c%lld-%c%lld\n", p.kind,
                                             (long long)p.id, q.kind, (long long)q.id);
                    }
                    fail("PathNotFound", "no midpoint route for a carried line");
                }
            }
            emb.segment_image[s->id] = oriented(w, c, a);
            done.insert(s->id);
        }
    };
    if (passengers_first) route_passengers();

    if (method == SubdivisionMethod::T42) {
        // structural claim: only singles and loaded pairs occur; buried edges
        // are routed globally through fresh edges after all sites are placed
        if (site.star) fail("NoMethodApplies", "loaded star under interior-edge-path method");
        if (site.faces.size() > 2)
            fail("NoMethodApplies", "loaded fan of size " + std::to_string(site.faces.size()) +
                                        " under interior-edge-path method");
        outc.tag = single ? "t42-single" : "t42-pair";
    } else if (method == SubdivisionMethod::Fixture) {
        if (site.star) {
            std::vector<const Segment*> radial;
            for (const Segment* s : segs)
                if (touches(*s, {'v', center})) radial.push_back(s);
            bool placed = false;
            for (VertexId ap : w.pm.interior_vertices) {
                WorkSnap sn = snap(w);
                bool ok = true;
                std::vector<Chain> ec, rc;
                try {
                    for (EdgeId eid : site.loaded_edges)
                        ec.push_back(chord_path(w, outer_of(P.edge(eid)), ap, true));
                    for (const Segment* s : radial) {
                        Node o = other_end(*s, {'v', center});
                        if (o.kind != 'v') {
                            ok = false;
                            break;
                        }
                        rc.push_back(chord_path(w, o.id, ap, true));
                    }
                } catch (const Error&) {
                    ok = false;
                }
                if (!ok) {
                    restore(w, sn);
                    continue;
                }
                emb.vertex_image[center] = {'v', ap};
                for (size_t i = 0; i < site.loaded_edges.size(); ++i) {
                    const StageEdge& E = P.edge(site.loaded_edges[i]);
                    emb.edge_image[site.loaded_edges[i]] =
                        oriented(w, ec[i], image_node(emb, {'v', E.v1}));
                }
                for (size_t i = 0; i < radial.size(); ++i) {
                    emb.segment_image[radial[i]->id] =
                        oriented(w, rc[i], image_node(emb, radial[i]->a));
                    done.insert(radial[i]->id);
                }
                placed = true;
                break;
            }
            if (!placed) fail("PathNotFound", "no apex vertex for loaded star");
            outc.tag = "fixture-star";
        } else {
            for (EdgeId eid : site.loaded_edges) {
                const StageEdge& E = P.edge(eid);
                emb.edge_image[eid] = chord_path(w, E.v1, E.v2, true);
            }
            outc.tag = single ? "fixture-single" : "fixture-pair";
        }
    } else {  // theorem 4.1 style
        if (site.star) {
            std::vector<JunctionTask> tasks;
            std::vector<const Segment*> radial;
            bool any_m = false;
            for (EdgeId eid : site.loaded_edges)
                tasks.push_back({{'v', outer_of(P.edge(eid))}, true});
            for (const Segment* s : segs)
                if (touches(*s, {'v', center})) {
                    Node o = other_end(*s, {'v', center});
                    if (o.kind == 'm') any_m = true;
                    tasks.push_back({o, false});
                    radial.push_back(s);
                    done.insert(s->id);
                }
            JunctionResult jr;
            if (!try_place_junction(w, tasks, jr)) {
                std::fprintf(stderr, "DBG star center=%lld tasks:\n", (long long)center);
                for (auto& t : tasks)
                    std::fprintf(stderr, "  %c%lld ms=%d\n", t.outer.kind, (long long)t.outer.id,
                                 (int)t.midpoint_style);
                for (Index i : w.pv.faces) {
                    const StageFace& f = w.child.faces[i];
                    std::fprintf(stderr, "  f%lld:", (long long)f.id);
                    for (VertexId v : f.vertices) std::fprintf(stderr, " %lld", (long long)v);
                    std::fprintf(stderr, "\n");
                }
                std::fprintf(stderr, "  interior verts=%zu\n", w.pm.interior_vertices.size());
                JunctionResult jr2;
                try_place_junction(w, tasks, jr2, true);
                fail("PathNotFound", "no junction placement for loaded star");
            }
            emb.vertex_image[center] = {'j', jr.j};
            for (size_t i = 0; i < site.loaded_edges.size(); ++i) {
                const StageEdge& E = P.edge(site.loaded_edges[i]);
                emb.edge_image[site.loaded_edges[i]] =
                    oriented(w, jr.chains[i], image_node(emb, {'v', E.v1}));
            }
            for (size_t i = 0; i < radial.size(); ++i)
                emb.segment_image[radial[i]->id] =
                    oriented(w, jr.chains[site.loaded_edges.size() + i],
                             image_node(emb, radial[i]->a));
            outc.tag = any_m ? "V" : "III";
        } else if (!single) {
            bool any_vii = false;
            for (EdgeId eid : site.loaded_edges) {
            const StageEdge& E = P.edge(eid);
            std::vector<const Segment*> gamma;
            for (const Segment* s : segs)
                if (touches(*s, {'m', eid})) gamma.push_back(s);
            const bool hasmid = pov.midpoints.count(eid) != 0;
            if (!gamma.empty()) {
                std::vector<JunctionTask> tasks{{{'v', E.v1}, true}, {{'v', E.v2}, true}};
                for (const Segment* s : gamma) {
                    tasks.push_back({other_end(*s, {'m', eid}), false});
                    done.insert(s->id);
                }
                JunctionResult jr;
                if (!try_place_junction(w, tasks, jr))
                    fail("PathNotFound", "no junction placement for loaded pair");
                Chain full = jr.chains[0];  // v1 -> j
                Chain back = jr.chains[1];  // v2 -> j
                reverse_chain(back);
                full.nodes.insert(full.nodes.end(), back.nodes.begin() + 1, back.nodes.end());
                full.items.insert(full.items.end(), back.items.begin(), back.items.end());
                emb.edge_image[eid] = full;
                emb.midpoint_image[eid] = {'j', jr.j};
                for (size_t i = 0; i < gamma.size(); ++i)
                    emb.segment_image[gamma[i]->id] =
                        oriented(w, jr.chains[2 + i], image_node(emb, gamma[i]->a));
                any_vii = true;
            } else if (hasmid) {
                Chain c;
                try {
                    c = w.materialize(midpoint_path(w.child, w.pv, w.pm, {'v', E.v1}, {'v', E.v2},
                                                    w.used_faces, w.mid_avoid(), true, w.sharer()));
                } catch (const Error&) {
                    fail("PathNotFound", "no midpoint route for a buried pair edge");
                }
                emb.edge_image[eid] = c;
                emb.midpoint_image[eid] = c.nodes[c.nodes.size() / 2];
                any_vii = true;
            } else {
                try {
                    emb.edge_image[eid] = chord_path(w, E.v1, E.v2, false);
                } catch (const Error&) {
                    // the endpoint's tile may expose no interior vertex; route
                    // through midpoints of interior edges instead
                    try {
                        emb.edge_image[eid] = w.materialize(
                            midpoint_path(w.child, w.pv, w.pm, {'v', E.v1}, {'v', E.v2},
                                          w.used_faces, w.mid_avoid(), true, w.sharer()));
                    } catch (const Error&) {
                        std::fprintf(stderr, "DBG pair E=%lld v=%lld w=%lld patch:\n", (long long)eid,
                                     (long long)E.v1, (long long)E.v2);
                        for (Index i : w.pv.faces) {
                            const StageFace& f = w.child.faces[i];
                            std::fprintf(stderr, "  f%lld:", (long long)f.id);
                            for (VertexId v : f.vertices) std::fprintf(stderr, " %lld", (long long)v);
                            std::fprintf(stderr, "\n");
                        }
                        std::fprintf(stderr, "  used_faces:");
                        for (FaceId F : w.used_faces) std::fprintf(stderr, " %lld", (long long)F);
                        std::fprintf(stderr, "\n  used_edges:");
                        for (EdgeId e : w.used_edges) std::fprintf(stderr, " %lld", (long long)e);
                        std::fprintf(stderr, "\n  mids on interior edges:");
                        for (EdgeId e : w.pv.interior_edges)
                            if (w.out.midpoints.count(e)) std::fprintf(stderr, " %lld", (long long)e);
                        std::fprintf(stderr, "\n  interior edges:");
                        for (EdgeId e : w.pv.interior_edges) std::fprintf(stderr, " %lld", (long long)e);
                        std::fprintf(stderr, "\n");
                        for (const Chain& ch : w.chains) {
                            std::fprintf(stderr, "  chain:");
                            for (const Node& n : ch.nodes)
                                std::fprintf(stderr, " %c%lld", n.kind, (long long)n.id);
                            std::fprintf(stderr, "\n");
                        }
                        throw;
                    }
                }
            }
            }
            outc.tag = any_vii ? "VII" : "II";
        } else {
            outc.tag = segs.empty() && juns.empty() ? "I" : (juns.empty() ? "IV" : "VI");
        }
    }

    // former junctions become junctions again, fed by their incident lines
    for (const Junction* jp : juns) {
        std::vector<JunctionTask> tasks;
        std::vector<const Segment*> rad;
        for (const Segment* s : segs)
            if (!done.count(s->id) && touches(*s, {'j', jp->id})) {
                Node o = other_end(*s, {'j', jp->id});
                tasks.push_back({o, o.kind == 'm'});
                rad.push_back(s);
                done.insert(s->id);
            }
        JunctionResult jr;
        if (!try_place_junction(w, tasks, jr)) {
            std::fprintf(stderr, "DBG carried junction j%lld face=%lld tasks:\n", (long long)jp->id,
                         (long long)jp->face);
            for (auto& t : tasks)
                std::fprintf(stderr, "  %c%lld ms=%d\n", t.outer.kind, (long long)t.outer.id,
                             (int)t.midpoint_style);
            for (Index i : w.pv.faces) {
                const StageFace& f = w.child.faces[i];
                std::fprintf(stderr, "  f%lld:", (long long)f.id);
                for (VertexId v : f.vertices) std::fprintf(stderr, " %lld", (long long)v);
                std::fprintf(stderr, "\n");
            }
            std::fprintf(stderr, "  used_faces:");
            for (FaceId F : w.used_faces) std::fprintf(stderr, " %lld", (long long)F);
            std::fprintf(stderr, "\n");
            fail("PathNotFound", "no junction placement for carried junction");
        }
        emb.junction_image[jp->id] = {'j', jr.j};
        for (size_t i = 0; i < rad.size(); ++i)
            emb.segment_image[rad[i]->id] = oriented(w, jr.chains[i], image_node(emb, rad[i]->a));
    }

    // buried loaded edges that carried a midpoint but no incident lines: the
    // midpoint maps to the middle node of the edge's replacement chain
    for (EdgeId eid : site.loaded_edges) {
        if (!pov.midpoints.count(eid) || emb.midpoint_image.count(eid)) continue;
        const Chain& c = emb.edge_image.at(eid);
        if (c.nodes.size() < 3) {
            w.flag("midpoint on a one-item replacement chain");
            emb.midpoint_image[eid] = c.nodes.front();
        } else {
            emb.midpoint_image[eid] = c.nodes[c.nodes.size() / 2];
        }
    }

    route_passengers();
    for (const Segment* s : segs)
        if (!done.count(s->id) && !claimed.count(s->id))
            fail("GluingInconsistency", "carried line never routed");
}

void process_site(SiteWork& w, SubdivisionMethod method, const Overlay& pov, StepEmbedding& emb,
                  SiteOutcome& outc) {
    const WorkSnap s0 = snap(w);
    for (int attempt = 0;; ++attempt) {
        StepEmbedding local;
        SiteOutcome oc;
        try {
            process_site_attempt(w, method, pov, local, oc, attempt == 1);
        } catch (const Error& e) {
            if (attempt == 0 && e.name() == "PathNotFound") {
                restore(w, s0);
                continue;
            }
            throw;
        }
        outc = oc;
        for (auto& [k, v] : local.vertex_image) emb.vertex_image[k] = v;
        for (auto& [k, v] : local.edge_image) emb.edge_image[k] = std::move(v);
        for (auto& [k, v] : local.midpoint_image) emb.midpoint_image[k] = v;
        for (auto& [k, v] : local.segment_image) emb.segment_image[k] = std::move(v);
        for (auto& [k, v] : local.junction_image) emb.junction_image[k] = v;
        return;
    }
}

void compute_regions(SiteWork& w, StepEmbedding& emb) {
    const TilingStage& child = w.child;
    std::set<FaceId> crossed;
    std::set<EdgeId> chain_edges;
    for (const Chain& c : w.chains)
        for (const ChainItem& it : c.items) {
            if (it.kind == 's') crossed.insert(w.out.segment(it.id).face);
            else chain_edges.insert(it.id);
        }

    std::map<FaceId, int> comp;
    int nc = 0;
    for (Index i : w.pv.faces) {
        FaceId F = child.faces[i].id;
        if (crossed.count(F) || comp.count(F)) continue;
        int c = nc++;
        std::deque<FaceId> q{F};
        comp[F] = c;
        while (!q.empty()) {
            FaceId cur = q.front();
            q.pop_front();
            for (EdgeId e : w.pm.face_of.at(cur)->edges) {
                if (!w.pv.interior_edges.count(e) || chain_edges.count(e)) continue;
                for (FaceId nb : w.pm.faces_of_edge.at(e)) {
                    if (nb == cur || crossed.count(nb) || comp.count(nb)) continue;
                    comp[nb] = c;
                    q.push_back(nb);
                }
            }
        }
    }

    std::map<EdgeId, FaceId> bface;
    for (Index i : w.pv.faces)
        for (EdgeId e : child.faces[i].edges)
            if (w.pv.boundary_edges.count(e)) bface[e] = child.faces[i].id;

    std::set<EdgeId> loaded(w.site.loaded_edges.begin(), w.site.loaded_edges.end());
    std::map<int, FaceId> claim;
    for (Index idx : w.site.faces) {
        const StageFace& pf = w.parent.faces[idx];
        for (EdgeId e : pf.edges) {
            if (loaded.count(e)) continue;
            auto it = bface.find(e);
            if (it == bface.end()) {
                w.flag("surviving fan edge missing from patch boundary");
                continue;
            }
            if (crossed.count(it->second)) continue;
            int c = comp.at(it->second);
            auto [cit, fresh] = claim.emplace(c, pf.id);
            if (!fresh && cit->second != pf.id) w.flag("regions of distinct faces merge");
        }
    }

    std::map<FaceId, std::vector<FaceId>> regs;
    for (auto [F, c] : comp) {
        auto it = claim.find(c);
        if (it == claim.end()) w.flag("region claimed by no face");
        else regs[it->second].push_back(F);
    }
    for (Index idx : w.site.faces) {
        const StageFace& pf = w.parent.faces[idx];
        std::vector<FaceId>& r = emb.region[pf.id];
        r = regs.count(pf.id) ? regs[pf.id] : std::vector<FaceId>{};
        std::sort(r.begin(), r.end());
        emb.crossed[pf.id];
    }
    std::set<FaceId> attributed;
    for (FaceId F : crossed) {
        const StageFace& cf = child.faces[find_face(child, F)];
        std::set<VertexId> cv(cf.vertices.begin(), cf.vertices.end());
        for (Index idx : w.site.faces) {
            const StageFace& pf = w.parent.faces[idx];
            bool share = false;
            for (VertexId v : pf.vertices)
                if (cv.count(v)) {
                    share = true;
                    break;
                }
            if (share) {
                emb.crossed[pf.id].push_back(F);
                attributed.insert(F);
            }
        }
    }
    for (FaceId F : crossed)
        if (!attributed.count(F))
            for (Index idx : w.site.faces) emb.crossed[w.parent.faces[idx].id].push_back(F);
    for (Index idx : w.site.faces) {
        const StageFace& pf = w.parent.faces[idx];
        auto& cr = emb.crossed[pf.id];
        std::sort(cr.begin(), cr.end());
        cr.erase(std::unique(cr.begin(), cr.end()), cr.end());
        if (emb.region[pf.id].empty() && cr.empty()) w.flag("face lost its region");
    }
}

void check_chains(SiteWork& w, const StepEmbedding& emb) {
    std::set<Node> meet;  // nodes where chains may legitimately meet
    for (const auto& [k, n] : emb.vertex_image) meet.insert(n);
    for (const auto& [k, n] : emb.midpoint_image) meet.insert(n);
    for (const auto& [k, n] : emb.junction_image) meet.insert(n);

    std::set<std::pair<char, std::int64_t>> items;
    std::map<Node, int> inner;
    std::set<Node> ends;
    for (const Chain& c : w.chains) {
        if (c.nodes.size() != c.items.size() + 1 || c.nodes.empty()) {
            w.flag("malformed chain");
            continue;
        }
        std::set<Node> seen;
        for (const Node& n : c.nodes)
            if (!seen.insert(n).second) w.flag("chain revisits a point");
        for (size_t i = 0; i < c.items.size(); ++i) {
            const Node &a = c.nodes[i], &b = c.nodes[i + 1];
            if (c.items[i].kind == 'e') {
                const StageEdge& e = w.child.edge(c.items[i].id);
                if (a.kind != 'v' || b.kind != 'v' ||
                    std::min(a.id, b.id) != e.v1 || std::max(a.id, b.id) != e.v2)
                    w.flag("chain edge detached from its endpoints");
            } else {
                const Segment& s = w.out.segment(c.items[i].id);
                if (!((s.a == a && s.b == b) || (s.a == b && s.b == a)))
                    w.flag("chain chord detached from its endpoints");
            }
            if (!items.insert({c.items[i].kind, c.items[i].id}).second)
                w.flag("chains share an item");
        }
        for (size_t i = 1; i + 1 < c.nodes.size(); ++i) inner[c.nodes[i]]++;
        ends.insert(c.nodes.front());
        ends.insert(c.nodes.back());
    }
    for (const auto& [n, k] : inner)
        if ((k > 1 || ends.count(n)) && !meet.count(n)) w.flag("chains cross off a junction");
}

SubdivisionMethod resolve_method(const GluingSpec& spec, SubdivisionMethod m) {
    if (m != SubdivisionMethod::Auto) return m;
    if (check_hypotheses(spec, Theorem::T42).pass) return SubdivisionMethod::T42;
    if (check_hypotheses(spec, Theorem::T41).pass) return SubdivisionMethod::T41;
    return SubdivisionMethod::Fixture;
}

// Replaces every buried loaded edge by a path of fresh child edges between
// its endpoints.  The path may leave the patch glued over the edge's own fan
// (for valence-3 templates it must: the pair gluing flips the diagonal), so
// it is routed globally.  Paths are pairwise disjoint away from their
// endpoints; routes through surviving vertices are admitted but penalized.
void t42_edge_paths(const TilingStage& parent, const TilingStage& child,
                    const std::vector<GluingSite>& sites, StepEmbedding& emb) {
    std::vector<EdgeId> loaded;
    std::set<VertexId> load_ends;
    for (const GluingSite& s : sites)
        for (EdgeId e : s.loaded_edges) {
            loaded.push_back(e);
            const StageEdge& E = parent.edge(e);
            load_ends.insert(E.v1);
            load_ends.insert(E.v2);
        }
    std::sort(loaded.begin(), loaded.end());

    std::map<VertexId, std::vector<const StageEdge*>> adj;
    for (const StageEdge& e : child.edges) {
        if (e.id < parent.next_edge) continue;  // only fresh edges may stand in
        adj[e.v1].push_back(&e);
        adj[e.v2].push_back(&e);
    }
    std::set<VertexId> used_verts;
    std::set<EdgeId> used_edges;
    constexpr long kOldVertexPenalty = 100;  // prefer routes through fresh vertices

    for (EdgeId eid : loaded) {
        const StageEdge& E = parent.edge(eid);
        const VertexId a = E.v1, b = E.v2;
        std::map<VertexId, std::pair<long, EdgeId>> best;  // cost, incoming edge
        std::set<VertexId> done;
        std::set<std::tuple<long, VertexId>> pq{{0, a}};
        best[a] = {0, -1};
        while (!pq.empty()) {
            auto [cost, v] = *pq.begin();
            pq.erase(pq.begin());
            if (!done.insert(v).second) continue;
            if (v == b) break;
            auto it = adj.find(v);
            if (it == adj.end()) continue;
            for (const StageEdge* e : it->second) {
                if (used_edges.count(e->id)) continue;
                VertexId u = e->v1 == v ? e->v2 : e->v1;
                if (u != b && (used_verts.count(u) || load_ends.count(u))) continue;
                long c = cost + 1;
                if (u != b && u < parent.next_vertex) c += kOldVertexPenalty;
                auto bit = best.find(u);
                if (bit != best.end() && bit->second.first <= c) continue;
                best[u] = {c, e->id};
                pq.insert({c, u});
            }
        }
        if (!best.count(b))
            fail("PathNotFound", "no fresh-edge route for a buried edge");
        Chain ch;
        VertexId v = b;
        while (v != a) {
            EdgeId e = best.at(v).second;
            const StageEdge& se = child.edge(e);
            ch.items.push_back({'e', e});
            ch.nodes.push_back({'v', v});
            v = se.v1 == v ? se.v2 : se.v1;
        }
        ch.nodes.push_back({'v', a});
        std::reverse(ch.nodes.begin(), ch.nodes.end());
        std::reverse(ch.items.begin(), ch.items.end());
        for (const ChainItem& it : ch.items) used_edges.insert(it.id);
        for (size_t i = 1; i + 1 < ch.nodes.size(); ++i) used_verts.insert(ch.nodes[i].id);
        emb.edge_image[eid] = std::move(ch);
    }
}

// A quiet stage only proves closure once the multiset of edge counts has
// stopped changing shape; before that, new statuses (hence new site kinds)
// can still appear.
std::set<std::pair<Index, int>> count_profile(const TilingStage& st) {
    std::set<std::pair<Index, int>> p;
    for (const StageEdge& e : st.edges) p.insert({e.cls, e.count});
    return p;
}

int site_boundary_len(const TilingStage& st, const GluingSite& site) {
    std::set<EdgeId> loaded(site.loaded_edges.begin(), site.loaded_edges.end());
    std::set<EdgeId> b;
    for (Index idx : site.faces)
        for (EdgeId e : st.faces[idx].edges)
            if (!loaded.count(e)) b.insert(e);
    return static_cast<int>(b.size());
}

}  // namespace

StepResult subdivide_once(const GluingSpec& spec, const DecoratedStage& d, SubdivisionMethod method,
                          SubdivisionRule* catalog, bool require_known) {
    method = resolve_method(spec, method);
    StepResult r;
    r.sites = detect_loaded_fans(spec, d.stage);
    r.first_instance = d.stage.next_instance;
    for (const GluingSite& s : r.sites) {
        std::vector<FaceId> ids;
        for (Index idx : s.faces) ids.push_back(d.stage.faces[idx].id);
        r.site_faces.push_back(std::move(ids));
    }
    r.child.stage = grow(d.stage, spec);
    r.child.overlay.next_segment = d.overlay.next_segment;
    r.child.overlay.next_junction = d.overlay.next_junction;
    for (EdgeId e : d.overlay.midpoints)
        if (edge_exists(r.child.stage, e)) r.child.overlay.midpoints.insert(e);

    for (size_t k = 0; k < r.sites.size(); ++k) {
        const GluingSite& site = r.sites[k];
        Index inst = d.stage.next_instance + static_cast<Index>(k);
        SiteWork w{spec, d.stage, r.child.stage, r.child.overlay, site,
                   patch_view(r.child.stage, inst)};
        w.pm = make_pm(w.pv);
        const std::string key = site_key_impl(spec, d.stage, &d.overlay, site);
        SiteOutcome oc;
        try {
            process_site(w, method, d.overlay, r.embedding, oc);
            if (method != SubdivisionMethod::T42) {
                compute_regions(w, r.embedding);
                check_chains(w, r.embedding);
            }
        } catch (const Error& e) {
            std::string msg = e.what();
            msg = msg.substr(msg.find(": ") + 2);
            fail(e.name(), msg + " [stage " + std::to_string(d.stage.stage) + ", fan size " +
                               std::to_string(site.faces.size()) + (site.star ? ", star" : "") +
                               ", " + std::to_string(oc.decorations) + " decorations]");
        }

        int tid = -1;
        bool fresh = false;
        if (catalog) {
            auto it = catalog->index.find(key);
            if (it == catalog->index.end()) {
                if (require_known) fail("UntypedFace", "no rule tile matches a " + oc.tag + " site");
                if (static_cast<int>(catalog->types.size()) >= kTypeCap)
                    fail("ClosureExplosion",
                         "more than " + std::to_string(kTypeCap) + " tile types");
                tid = static_cast<int>(catalog->types.size());
                fresh = true;
                TileEntry e;
                e.id = tid;
                e.key = key;
                e.case_tag = oc.tag;
                e.fan_size = static_cast<int>(site.faces.size());
                e.star = site.star;
                e.boundary_len = site_boundary_len(d.stage, site);
                e.decorations = oc.decorations;
                e.patch_faces = static_cast<int>(w.pv.faces.size());
                e.added_segments = w.added_segments;
                e.identity = e.patch_faces == e.fan_size && e.added_segments == e.decorations &&
                             w.added_junctions == 0;
                e.checks_pass = w.ok;
                e.check_witness = w.why;
                catalog->index[key] = tid;
                catalog->types.push_back(std::move(e));
            } else {
                tid = it->second;
                TileEntry& e = catalog->types[tid];
                if (e.patch_faces != static_cast<int>(w.pv.faces.size()) ||
                    e.added_segments != w.added_segments || e.case_tag != oc.tag ||
                    e.decorations != oc.decorations) {
                    e.checks_pass = false;
                    if (e.check_witness.empty()) e.check_witness = "occurrences disagree";
                }
                if (!w.ok && e.checks_pass) {
                    e.checks_pass = false;
                    e.check_witness = w.why;
                }
            }
        }
        r.site_types.push_back(tid);
        r.site_fresh.push_back(fresh);
    }
    if (method == SubdivisionMethod::T42)
        t42_edge_paths(d.stage, r.child.stage, r.sites, r.embedding);
    return r;
}

ReplacementRule derive_replacement_rule(const GluingSpec& spec, const std::string& base_template,
                                        int max_stages) {
    ReplacementRule rr;
    rr.base = base_template;
    rr.spec_hash = spec_hash(spec);
    TilingStage cur = initial_stage(spec, base_template);

    auto enter = [&](const TilingStage& st, const GluingSite& s) {
        std::string key = fan_type_key(spec, st, s);
        auto it = rr.index.find(key);
        if (it != rr.index.end()) return std::pair<int, bool>{it->second, false};
        int id = static_cast<int>(rr.types.size());
        FanTypeInfo fi;
        fi.id = id;
        fi.key = key;
        fi.size = static_cast<int>(s.faces.size());
        fi.star = s.star;
        fi.boundary_len = site_boundary_len(st, s);
        rr.types.push_back(std::move(fi));
        rr.children.emplace_back();
        rr.index[key] = id;
        return std::pair<int, bool>{id, true};
    };

    std::vector<GluingSite> sites = detect_loaded_fans(spec, cur);
    std::vector<int> types;
    for (const GluingSite& s : sites) types.push_back(enter(cur, s).first);

    for (int n = 0;; ++n) {
        if (n >= max_stages)
            fail("NotClosedWithinCap",
                 "replacement types still growing after " + std::to_string(max_stages) + " stages");
        TilingStage nxt = grow(cur, spec);
        rr.stages_used = n + 1;
        std::vector<GluingSite> nsites = detect_loaded_fans(spec, nxt);
        std::vector<int> ntypes;
        bool fresh = false;
        for (const GluingSite& s : nsites) {
            auto [t, f] = enter(nxt, s);
            ntypes.push_back(t);
            fresh |= f;
        }
        std::map<FaceId, int> tof;
        for (size_t i = 0; i < nsites.size(); ++i)
            for (Index idx : nsites[i].faces) tof[nxt.faces[idx].id] = ntypes[i];
        std::map<Index, std::vector<FaceId>> by_inst;
        for (const StageFace& f : nxt.faces)
            if (f.instance >= cur.next_instance) by_inst[f.instance].push_back(f.id);
        for (size_t k = 0; k < sites.size(); ++k) {
            int t = types[k];
            const std::vector<FaceId>& patch = by_inst[cur.next_instance + static_cast<Index>(k)];
            if (rr.types[t].patch_faces == 0)
                rr.types[t].patch_faces = static_cast<int>(patch.size());
            for (FaceId f : patch) rr.children[t].insert(tof.at(f));
        }
        if (!fresh && count_profile(cur) == count_profile(nxt)) return rr;
        cur = std::move(nxt);
        sites = std::move(nsites);
        types = std::move(ntypes);
    }
}

SubdivisionRule convert_to_subdivision(const ReplacementRule& rrule, const GluingSpec& spec,
                                       SubdivisionMethod method, int max_stages) {
    const SubdivisionMethod resolved = resolve_method(spec, method);
    SubdivisionRule rule;
    rule.method = resolved;
    rule.base = rrule.base;
    rule.spec_hash = rrule.spec_hash;

    auto run = [&]() {
        DecoratedStage d{initial_stage(spec, rrule.base), {}};
        std::vector<std::pair<int, Index>> pending;  // (type, instance in next stage)
        std::set<std::pair<Index, int>> prev_profile;
        for (int n = 0;; ++n) {
            std::set<std::pair<Index, int>> profile = count_profile(d.stage);
            const bool stable = n > 0 && profile == prev_profile;
            prev_profile = std::move(profile);
            std::vector<GluingSite> sites = detect_loaded_fans(spec, d.stage);
            bool all_known = true;
            std::vector<int> probe;
            for (const GluingSite& s : sites) {
                auto it = rule.index.find(site_key_impl(spec, d.stage, &d.overlay, s));
                if (it == rule.index.end()) {
                    all_known = false;
                    break;
                }
                probe.push_back(it->second);
            }
            if (stable && all_known) {
                std::map<FaceId, int> tof;
                for (size_t i = 0; i < sites.size(); ++i)
                    for (Index idx : sites[i].faces) tof[d.stage.faces[idx].id] = probe[i];
                for (auto [t, inst] : pending)
                    for (const StageFace& f : d.stage.faces)
                        if (f.instance == inst) rule.types[t].children.insert(tof.at(f.id));
                rule.closed = true;
                return;
            }
            if (n >= max_stages)
                fail("NotClosedWithinCap",
                     "tile types still growing after " + std::to_string(max_stages) + " stages");
            StepResult r = subdivide_once(spec, d, resolved, &rule);
            rule.stages_used = n + 1;
            if (!pending.empty()) {
                std::map<FaceId, int> tof;
                for (size_t i = 0; i < r.sites.size(); ++i)
                    for (Index idx : r.sites[i].faces)
                        tof[d.stage.faces[idx].id] = r.site_types[i];
                for (auto [t, inst] : pending)
                    for (const StageFace& f : d.stage.faces)
                        if (f.instance == inst) rule.types[t].children.insert(tof.at(f.id));
            }
            pending.clear();
            for (size_t k = 0; k < r.sites.size(); ++k)
                pending.push_back({r.site_types[k], d.stage.next_instance + static_cast<Index>(k)});
            d = std::move(r.child);
        }
    };

    if (method == SubdivisionMethod::Auto && resolved == SubdivisionMethod::Fixture) {
        try {
            run();
        } catch (const Error& e) {
            fail("NoMethodApplies", std::string("no conversion method applies: ") + e.what());
        }
    } else {
        run();
    }
    return rule;
}

DecoratedStage subdivide_tiling(const SubdivisionRule& srule, const GluingSpec& spec,
                                const DecoratedStage& tiling, int steps) {
    DecoratedStage cur = tiling;
    SubdivisionRule cat = srule;  // occurrence statistics land on the copy
    for (int i = 0; i < steps; ++i) {
        StepResult r = subdivide_once(spec, cur, srule.method, &cat, /*require_known=*/true);
        cur = std::move(r.child);
    }
    return cur;
}

VerifyReport verify_subdivision(const SubdivisionRule& srule) {
    VerifyReport rep;
    auto add = [&](const std::string& name, bool pass, const std::string& witness) {
        rep.checks.push_back({name, pass, pass ? "" : witness});
    };
    add("closed", srule.closed, "type catalog not closed");
    add("finite_types", static_cast<int>(srule.types.size()) <= kTypeCap,
        "more than " + std::to_string(kTypeCap) + " types");
    bool emb = true;
    std::string ew;
    for (const TileEntry& t : srule.types)
        if (!t.checks_pass) {
            emb = false;
            ew = "type " + std::to_string(t.id) + ": " + t.check_witness;
            break;
        }
    add("embedding", emb, ew);
    bool kids = true;
    std::string kw;
    for (const TileEntry& t : srule.types)
        for (int c : t.children)
            if (c < 0 || c >= static_cast<int>(srule.types.size())) {
                kids = false;
                kw = "type " + std::to_string(t.id) + " has unknown child";
            }
    add("children_known", kids, kw);
    std::string ids;
    for (const TileEntry& t : srule.types)
        if (t.identity) ids += (ids.empty() ? "" : ",") + std::to_string(t.id);
    rep.checks.push_back({"identity_tiles", true, ids});
    rep.pass = true;
    for (const StageCheck& c : rep.checks) rep.pass = rep.pass && c.pass;
    return rep;
}

// ---------------------------------------------------------------------------
// Nested images.

NestedImage initial_image(const TilingStage& stage, FaceId face) {
    NestedImage img;
    img.faces.insert(face);
    const StageFace& f = stage.faces[find_face(stage, face)];
    const int m = static_cast<int>(f.edges.size());
    for (int i = 0; i < m; ++i) {
        Chain c;
        c.nodes = {{'v', f.vertices[i]}, {'v', f.vertices[(i + 1) % m]}};
        c.items = {{'e', f.edges[i]}};
        img.boundary.push_back(std::move(c));
    }
    return img;
}

NestedImage advance_image(const NestedImage& img, const StepResult& step) {
    const StepEmbedding& emb = step.embedding;
    const TilingStage& child = step.child.stage;
    NestedImage out;

    for (const Chain& c : img.boundary) {
        Chain nc;
        nc.nodes.push_back(image_node(emb, c.nodes.front()));
        for (size_t i = 0; i < c.items.size(); ++i) {
            const Node want = nc.nodes.back();
            const ChainItem& it = c.items[i];
            const Chain* rep = nullptr;
            if (it.kind == 'e') {
                auto eit = emb.edge_image.find(it.id);
                if (eit != emb.edge_image.end()) rep = &eit->second;
            } else {
                auto sit = emb.segment_image.find(it.id);
                if (sit != emb.segment_image.end()) rep = &sit->second;
            }
            if (!rep) {
                nc.items.push_back(it);
                nc.nodes.push_back(image_node(emb, c.nodes[i + 1]));
                continue;
            }
            Chain piece = *rep;
            if (!(piece.nodes.front() == want)) reverse_chain(piece);
            if (!(piece.nodes.front() == want))
                fail("GluingInconsistency", "replacement chain does not continue the boundary");
            nc.items.insert(nc.items.end(), piece.items.begin(), piece.items.end());
            nc.nodes.insert(nc.nodes.end(), piece.nodes.begin() + 1, piece.nodes.end());
        }
        out.boundary.push_back(std::move(nc));
    }

    // Recover the region from the new walk: edge images may leave the old
    // region's patches (buried pair edges flip), so the per-face region maps
    // cannot simply be unioned.  Cut the child sphere along the walk and keep
    // the components seeded by instances glued fully inside the old region.
    std::set<EdgeId> walk_edges;
    std::set<FaceId> blockers;  // faces crossed by walk chords sit astride
    for (const Chain& c : out.boundary)
        for (const ChainItem& it : c.items) {
            if (it.kind == 'e') walk_edges.insert(it.id);
            else blockers.insert(step.child.overlay.segment(it.id).face);
        }

    // stage orientations are globally consistent, so the face holding a walk
    // edge in forward direction lies inside, the reversed one outside
    std::map<std::pair<VertexId, VertexId>, FaceId> dir_face;
    for (const StageFace& f : child.faces) {
        const int m = static_cast<int>(f.vertices.size());
        for (int i = 0; i < m; ++i)
            dir_face[{f.vertices[i], f.vertices[(i + 1) % m]}] = f.id;
    }
    std::set<FaceId> inside, outside;
    for (const Chain& c : out.boundary)
        for (size_t i = 0; i < c.items.size(); ++i) {
            if (c.items[i].kind != 'e') continue;
            const Node &a = c.nodes[i], &b = c.nodes[i + 1];
            auto fwd = dir_face.find({a.id, b.id});
            auto rev = dir_face.find({b.id, a.id});
            if (fwd == dir_face.end() || rev == dir_face.end())
                fail("GluingInconsistency", "walk edge without two sides");
            if (!blockers.count(fwd->second)) inside.insert(fwd->second);
            if (!blockers.count(rev->second)) outside.insert(rev->second);
        }

    std::map<EdgeId, std::vector<FaceId>> ef;
    std::map<FaceId, const StageFace*> fp;
    for (const StageFace& f : child.faces) {
        fp[f.id] = &f;
        for (EdgeId e : f.edges)
            if (!walk_edges.count(e)) ef[e].push_back(f.id);
    }
    std::map<FaceId, int> comp;
    std::vector<std::pair<bool, bool>> tag;  // touches inside / outside of walk
    for (const StageFace& f : child.faces) {
        if (blockers.count(f.id) || comp.count(f.id)) continue;
        int c = static_cast<int>(tag.size());
        tag.push_back({false, false});
        std::deque<FaceId> q{f.id};
        comp[f.id] = c;
        while (!q.empty()) {
            FaceId cur = q.front();
            q.pop_front();
            if (inside.count(cur)) tag[c].first = true;
            if (outside.count(cur)) tag[c].second = true;
            for (EdgeId e : fp.at(cur)->edges)
                for (FaceId nb : ef[e])
                    if (nb != cur && !blockers.count(nb) && !comp.count(nb)) {
                        comp[nb] = c;
                        q.push_back(nb);
                    }
        }
    }
    for (auto& [in, outl] : tag)
        if (in && outl) fail("GluingInconsistency", "nested image walk does not separate");
    for (auto [f, c] : comp)
        if (tag[c].first) out.faces.insert(f);
    out.crossed = blockers;
    if (out.faces.empty()) fail("GluingInconsistency", "nested image lost its region");
    return out;
}

bool nested_image_ok(const DecoratedStage& d, const NestedImage& img, std::string* why) {
    auto bad = [&](const std::string& w) {
        if (why) *why = w;
        return false;
    };
    if (img.faces.empty()) return bad("empty region");
    // region connectivity (crossed faces count as part of the disk)
    std::set<FaceId> all = img.faces;
    all.insert(img.crossed.begin(), img.crossed.end());
    std::map<EdgeId, std::vector<FaceId>> ef;
    for (FaceId f : all)
        for (EdgeId e : d.stage.faces[find_face(d.stage, f)].edges) ef[e].push_back(f);
    std::set<FaceId> seen{*all.begin()};
    std::deque<FaceId> q{*all.begin()};
    while (!q.empty()) {
        FaceId cur = q.front();
        q.pop_front();
        for (EdgeId e : d.stage.faces[find_face(d.stage, cur)].edges)
            for (FaceId nb : ef[e])
                if (seen.insert(nb).second) q.push_back(nb);
    }
    if (seen.size() != all.size()) return bad("region disconnected");

    // boundary chains concatenate into one closed walk
    std::vector<Node> walk;
    std::set<std::pair<char, std::int64_t>> walk_items;
    for (const Chain& c : img.boundary) {
        if (c.nodes.empty()) return bad("empty boundary chain");
        if (!walk.empty() && !(walk.back() == c.nodes.front())) return bad("boundary chain gap");
        for (size_t i = walk.empty() ? 0 : 1; i < c.nodes.size(); ++i) walk.push_back(c.nodes[i]);
        for (const ChainItem& it : c.items)
            if (!walk_items.insert({it.kind, it.id}).second) return bad("boundary repeats an item");
    }
    if (walk.size() < 2 || !(walk.front() == walk.back())) return bad("boundary walk not closed");
    std::set<Node> wseen;
    for (size_t i = 0; i + 1 < walk.size(); ++i)
        if (!wseen.insert(walk[i]).second) return bad("boundary walk pinched");

    // when nothing is crossed, the walk must be exactly the region border
    if (img.crossed.empty()) {
        std::set<EdgeId> border;
        for (auto& [e, fs] : ef)
            if (fs.size() == 1) border.insert(e);
        std::set<EdgeId> walk_edges;
        for (auto [k, id] : walk_items) {
            if (k != 'e') return bad("chord on an uncrossed boundary");
            walk_edges.insert(id);
        }
        if (walk_edges != border) return bad("boundary walk differs from region border");
    }
    return true;
}

}  // namespace polysub
