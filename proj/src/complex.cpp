#include "polysub/complex.hpp"

#include <algorithm>
#include <map>
#include <utility>

namespace polysub {

namespace {

std::string cells_str(VertexId a, VertexId b) {
    return "(" + std::to_string(a) + "," + std::to_string(b) + ")";
}

}  // namespace

SphericalComplex SphericalComplex::build(const std::vector<std::vector<VertexId>>& face_cycles) {
    std::vector<FaceInput> faces;
    faces.reserve(face_cycles.size());
    for (const auto& cyc : face_cycles) faces.push_back({cyc, {}});
    return assemble(faces, false);
}

SphericalComplex SphericalComplex::build_with_edges(const std::vector<FaceInput>& faces) {
    return assemble(faces, true);
}

SphericalComplex SphericalComplex::assemble(const std::vector<FaceInput>& faces, bool edges_explicit) {
    if (faces.empty()) fail("Disconnected", "empty face list");
    SphericalComplex c;

    // dense vertex indices in ascending id order
    std::vector<VertexId> ids;
    for (const auto& f : faces) {
        if (f.vertices.size() < 2) fail("OrientationMismatch", "face cycle shorter than 2");
        if (edges_explicit && f.edges.size() != f.vertices.size())
            fail("OrientationMismatch", "edge list size does not match face cycle");
        for (VertexId v : f.vertices) ids.push_back(v);
    }
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    c.vertex_ids_ = ids;
    auto vindex = [&](VertexId v) {
        return static_cast<Index>(std::lower_bound(ids.begin(), ids.end(), v) - ids.begin());
    };

    // half-edges face by face
    for (size_t fi = 0; fi < faces.size(); ++fi) {
        const auto& cyc = faces[fi].vertices;
        Index base = static_cast<Index>(c.he_.size());
        Index k = static_cast<Index>(cyc.size());
        c.face_he_.push_back(base);
        for (Index i = 0; i < k; ++i) {
            HalfEdge h;
            h.origin = vindex(cyc[i]);
            h.face = static_cast<Index>(fi);
            h.next = base + (i + 1) % k;
            c.he_.push_back(h);
        }
    }

    // twin matching
    if (edges_explicit) {
        std::map<EdgeId, std::vector<Index>> by_edge;
        Index h = 0;
        for (const auto& f : faces)
            for (EdgeId e : f.edges) by_edge[e].push_back(h++);
        for (auto& [eid, hs] : by_edge) {
            if (hs.size() > 2)
                fail("NonManifoldEdge", "edge " + std::to_string(eid) + " lies in more than two faces");
            if (hs.size() == 2) {
                Index a = hs[0], b = hs[1];
                Index ta = c.he_[c.he_[a].next].origin;
                Index tb = c.he_[c.he_[b].next].origin;
                if (!(c.he_[a].origin == tb && c.he_[b].origin == ta))
                    fail("OrientationMismatch",
                         "edge " + std::to_string(eid) + " traversed in the same direction twice");
                c.he_[a].twin = b;
                c.he_[b].twin = a;
            }
        }
        // edge indices in first-appearance order
        for (Index h2 = 0; h2 < static_cast<Index>(c.he_.size()); ++h2) {
            if (c.he_[h2].edge != kNone) continue;
            Index e = static_cast<Index>(c.edge_he_.size());
            c.he_[h2].edge = e;
            if (c.he_[h2].twin != kNone) c.he_[c.he_[h2].twin].edge = e;
            c.edge_he_.push_back(h2);
        }
        c.edge_ids_.resize(c.edge_he_.size());
        {
            Index h2 = 0;
            for (const auto& f : faces)
                for (EdgeId e : f.edges) c.edge_ids_[c.he_[h2++].edge] = e;
        }
    } else {
        std::map<std::pair<Index, Index>, Index> directed;
        std::map<std::pair<Index, Index>, int> undirected;
        for (Index h = 0; h < static_cast<Index>(c.he_.size()); ++h) {
            Index u = c.he_[h].origin, v = c.he_[c.he_[h].next].origin;
            ++undirected[{std::min(u, v), std::max(u, v)}];
        }
        for (const auto& [uv, n] : undirected)
            if (n > 2)
                fail("NonManifoldEdge", "edge " + cells_str(c.vertex_ids_[uv.first], c.vertex_ids_[uv.second]) +
                                            " lies in more than two faces");
        for (Index h = 0; h < static_cast<Index>(c.he_.size()); ++h) {
            Index u = c.he_[h].origin, v = c.he_[c.he_[h].next].origin;
            if (u == v) fail("OrientationMismatch", "degenerate loop edge");
            auto [it, fresh] = directed.insert({{u, v}, h});
            if (!fresh)
                fail("OrientationMismatch",
                     "edge " + cells_str(c.vertex_ids_[u], c.vertex_ids_[v]) +
                         " traversed in the same direction by two faces");
            auto rev = directed.find({v, u});
            if (rev != directed.end()) {
                c.he_[h].twin = rev->second;
                c.he_[rev->second].twin = h;
            }
        }
        for (Index h = 0; h < static_cast<Index>(c.he_.size()); ++h) {
            if (c.he_[h].edge != kNone) continue;
            Index e = static_cast<Index>(c.edge_he_.size());
            c.he_[h].edge = e;
            if (c.he_[h].twin != kNone) c.he_[c.he_[h].twin].edge = e;
            c.edge_he_.push_back(h);
            c.edge_ids_.push_back(e);
        }
    }

    // prev, vertex anchors, boundary flag
    c.prev_.assign(c.he_.size(), kNone);
    for (Index h = 0; h < static_cast<Index>(c.he_.size()); ++h) c.prev_[c.he_[h].next] = h;
    c.vertex_he_.assign(c.vertex_ids_.size(), kNone);
    for (Index h = 0; h < static_cast<Index>(c.he_.size()); ++h)
        if (c.vertex_he_[c.he_[h].origin] == kNone) c.vertex_he_[c.he_[h].origin] = h;
    for (const auto& h : c.he_)
        if (h.twin == kNone) { c.has_boundary_ = true; break; }

    // connectivity over the half-edge graph
    std::vector<char> seen(c.he_.size(), 0);
    std::vector<Index> stack{0};
    seen[0] = 1;
    size_t count = 1;
    while (!stack.empty()) {
        Index h = stack.back();
        stack.pop_back();
        for (Index nb : {c.he_[h].next, c.he_[h].twin}) {
            if (nb != kNone && !seen[nb]) {
                seen[nb] = 1;
                ++count;
                stack.push_back(nb);
            }
        }
    }
    c.connected_ = (count == c.he_.size());
    if (!c.connected_) fail("Disconnected", "face set is not connected");

    c.face_size_.assign(c.face_he_.size(), 0);
    for (const auto& h : c.he_) ++c.face_size_[h.face];
    c.valence_.resize(c.vertex_ids_.size());
    for (Index v = 0; v < c.vertex_count(); ++v)
        c.valence_[v] = static_cast<Index>(c.halfedges_out_of(v).size());
    c.edge_lookup_.reserve(c.edge_ids_.size());
    for (Index e = 0; e < c.edge_count(); ++e) c.edge_lookup_.push_back({c.edge_ids_[e], e});
    std::sort(c.edge_lookup_.begin(), c.edge_lookup_.end());
    return c;
}

bool SphericalComplex::is_sphere() const {
    return !has_boundary_ && connected_ && euler_characteristic() == 2;
}

std::optional<Index> SphericalComplex::vertex_index(VertexId id) const {
    auto it = std::lower_bound(vertex_ids_.begin(), vertex_ids_.end(), id);
    if (it == vertex_ids_.end() || *it != id) return std::nullopt;
    return static_cast<Index>(it - vertex_ids_.begin());
}

std::optional<Index> SphericalComplex::edge_index(EdgeId id) const {
    auto it = std::lower_bound(edge_lookup_.begin(), edge_lookup_.end(),
                               std::pair<EdgeId, Index>{id, kNone});
    if (it == edge_lookup_.end() || it->first != id) return std::nullopt;
    return it->second;
}

std::vector<Index> SphericalComplex::face_halfedges(Index f) const {
    std::vector<Index> out;
    Index h = face_he_[f];
    do { out.push_back(h); h = he_[h].next; } while (h != face_he_[f]);
    return out;
}

std::vector<Index> SphericalComplex::face_vertices(Index f) const {
    std::vector<Index> out;
    for (Index h : face_halfedges(f)) out.push_back(he_[h].origin);
    return out;
}

std::vector<VertexId> SphericalComplex::face_vertex_ids(Index f) const {
    std::vector<VertexId> out;
    for (Index v : face_vertices(f)) out.push_back(vertex_ids_[v]);
    return out;
}

std::vector<Index> SphericalComplex::face_edges(Index f) const {
    std::vector<Index> out;
    for (Index h : face_halfedges(f)) out.push_back(he_[h].edge);
    return out;
}

std::pair<Index, Index> SphericalComplex::edge_endpoints(Index e) const {
    Index h = edge_he_[e];
    Index a = he_[h].origin, b = he_[he_[h].next].origin;
    return {std::min(a, b), std::max(a, b)};
}

std::pair<Index, Index> SphericalComplex::edge_faces(Index e) const {
    Index h = edge_he_[e];
    Index f1 = he_[h].face;
    Index f2 = he_[h].twin == kNone ? kNone : he_[he_[h].twin].face;
    return {f1, f2};
}

std::vector<Index> SphericalComplex::halfedges_out_of(Index v) const {
    Index start = vertex_he_[v];
    // on a patch boundary, rewind to the half-edge with no rotation predecessor
    for (Index h = start;;) {
        if (he_[h].twin == kNone) { start = h; break; }
        Index p = he_[he_[h].twin].next;
        if (p == vertex_he_[v]) break;  // closed walk
        h = p;
    }
    std::vector<Index> out;
    Index h = start;
    do {
        out.push_back(h);
        Index p = prev_[h];
        if (he_[p].twin == kNone) break;
        h = he_[p].twin;
    } while (h != start);
    return out;
}

bool SphericalComplex::vertex_on_boundary(Index v) const {
    for (Index h : halfedges_out_of(v))
        if (he_[h].twin == kNone || he_[prev_[h]].twin == kNone) return true;
    return false;
}

std::vector<Index> SphericalComplex::faces_around_vertex(Index v) const {
    std::vector<Index> out;
    for (Index h : halfedges_out_of(v)) out.push_back(he_[h].face);
    return out;
}

Index SphericalComplex::shared_edge(Index f1, Index f2) const {
    auto s = shared_edges(f1, f2);
    return s.empty() ? kNone : s[0];
}

std::vector<Index> SphericalComplex::shared_edges(Index f1, Index f2) const {
    std::vector<Index> out;
    for (Index h : face_halfedges(f1)) {
        Index t = he_[h].twin;
        if (t != kNone && he_[t].face == f2) out.push_back(he_[h].edge);
    }
    return out;
}

SphericalComplex SphericalComplex::mirrored() const {
    std::vector<FaceInput> faces(face_count());
    for (Index f = 0; f < face_count(); ++f) {
        auto vs = face_vertex_ids(f);
        auto es = face_edges(f);
        Index k = static_cast<Index>(vs.size());
        FaceInput& out = faces[f];
        for (Index j = 0; j < k; ++j) {
            out.vertices.push_back(vs[k - 1 - j]);
            out.edges.push_back(edge_ids_[es[(2 * k - 2 - j) % k]]);
        }
    }
    return build_with_edges(faces);
}

// ---------------------------------------------------------------------------
// fans

std::vector<Fan> enumerate_fans(const SphericalComplex& c) {
    std::vector<Fan> out;
    for (Index f = 0; f < c.face_count(); ++f) out.push_back(Fan{kNone, {f}, false});
    for (Index v = 0; v < c.vertex_count(); ++v) {
        auto ring = c.faces_around_vertex(v);
        Index d = static_cast<Index>(ring.size());
        for (Index len = 2; len < d; ++len) {
            for (Index s = 0; s < d; ++s) {
                Fan fan;
                fan.center = v;
                for (Index j = 0; j < len; ++j) fan.faces.push_back(ring[(s + j) % d]);
                if (fan.faces.front() > fan.faces.back())
                    std::reverse(fan.faces.begin(), fan.faces.end());
                out.push_back(std::move(fan));
            }
        }
        // the full star, started at the least face, lesser direction
        Fan star;
        star.center = v;
        star.star = true;
        Index s = static_cast<Index>(std::min_element(ring.begin(), ring.end()) - ring.begin());
        std::vector<Index> fwd, bwd;
        for (Index j = 0; j < d; ++j) {
            fwd.push_back(ring[(s + j) % d]);
            bwd.push_back(ring[(s - j + d) % d]);
        }
        star.faces = std::min(fwd, bwd);
        out.push_back(std::move(star));
    }
    return out;
}

// ---------------------------------------------------------------------------
// canonical codes

namespace {

// Appends one traversal entry; integers in decimal, labels length-prefixed.
// Face size and origin valence are redundant invariants that make codes
// diverge early, so losing starts abort after a few entries.
void append_entry(std::string& code, Index next_rank, Index twin_rank, Index fsize, Index val,
                  const std::string& fl, const std::string& el, const std::string& vl) {
    code += std::to_string(next_rank);
    code += ',';
    code += std::to_string(twin_rank);
    code += ',';
    code += std::to_string(fsize);
    code += ',';
    code += std::to_string(val);
    code += ';';
    for (const std::string* s : {&fl, &el, &vl}) {
        code += std::to_string(s->size());
        code += ':';
        code += *s;
        code += '|';
    }
}

const std::string kEmpty;

struct Traversal {
    std::vector<Index> order;    // visit order of half-edges
    std::string code;
};

// BFS-style traversal from h0; emit-time rank assignment over (next, twin).
// Aborts (returns false) as soon as the code exceeds `best` lexicographically.
bool traverse(const SphericalComplex& c, const CellLabels& labels, Index h0, const std::string* best,
              Traversal& out) {
    const Index H = c.halfedge_count();
    std::vector<Index> rank(H, kNone);
    out.order.clear();
    out.order.reserve(H);
    out.code.clear();
    rank[h0] = 0;
    out.order.push_back(h0);
    auto label = [](const std::vector<std::string>& v, Index i) -> const std::string& {
        return (i >= 0 && i < static_cast<Index>(v.size())) ? v[i] : kEmpty;
    };
    size_t checked = 0;
    for (size_t i = 0; i < out.order.size(); ++i) {
        Index h = out.order[i];
        Index n = c.he(h).next, t = c.he(h).twin;
        for (Index x : {n, t}) {
            if (x != kNone && rank[x] == kNone) {
                rank[x] = static_cast<Index>(out.order.size());
                out.order.push_back(x);
            }
        }
        append_entry(out.code, rank[n], t == kNone ? kNone : rank[t], c.face_size(c.he(h).face),
                     c.valence(c.he(h).origin), label(labels.face, c.he(h).face),
                     label(labels.edge, c.he(h).edge), label(labels.vertex, c.he(h).origin));
        if (best) {
            size_t p = out.code.size();
            size_t q = std::min(p, best->size());
            int cmp = out.code.compare(checked, q - checked, *best, checked, q - checked);
            if (cmp > 0) return false;
            if (cmp < 0) {
                best = nullptr;  // strictly better than best, no further comparing
            } else {
                checked = q;
                if (q == best->size() && p > q) return false;  // best is a proper prefix
            }
        }
    }
    return true;
}

CellLabels remap_labels_to(const SphericalComplex& from, const CellLabels& labels,
                           const SphericalComplex& to) {
    CellLabels out;
    out.face = labels.face;
    out.vertex = labels.vertex;
    if (!labels.edge.empty()) {
        out.edge.assign(to.edge_count(), "");
        for (Index e = 0; e < from.edge_count(); ++e) {
            auto me = to.edge_index(from.edge_id(e));
            if (me && e < static_cast<Index>(labels.edge.size())) out.edge[*me] = labels.edge[e];
        }
    }
    return out;
}

}  // namespace

CanonicalForm canonical_form(const SphericalComplex& c, const CellLabels& labels) {
    SphericalComplex mirror = c.mirrored();
    CellLabels mlabels = remap_labels_to(c, labels, mirror);

    CanonicalForm result;
    Traversal best, cur;
    bool have = false;
    bool best_reflected = false;
    for (int refl = 0; refl < 2; ++refl) {
        const SphericalComplex& cc = refl ? mirror : c;
        const CellLabels& ll = refl ? mlabels : labels;
        for (Index h0 = 0; h0 < cc.halfedge_count(); ++h0) {
            if (traverse(cc, ll, h0, have ? &best.code : nullptr, cur)) {
                if (!have || cur.code < best.code) {
                    best = cur;
                    best_reflected = refl;
                    have = true;
                }
            }
        }
    }
    const SphericalComplex& win = best_reflected ? mirror : c;
    result.sig.bytes = best.code;
    result.reflected = best_reflected;
    result.vertex_rank.assign(c.vertex_count(), kNone);
    result.edge_rank.assign(c.edge_count(), kNone);
    result.face_rank.assign(c.face_count(), kNone);
    Index vr = 0, er = 0, fr = 0;
    for (Index h : best.order) {
        Index v = win.he(h).origin;  // vertex/face indices agree between c and its mirror
        Index f = win.he(h).face;
        Index e = win.he(h).edge;
        if (best_reflected) e = *c.edge_index(win.edge_id(e));
        if (result.vertex_rank[v] == kNone) result.vertex_rank[v] = vr++;
        if (result.face_rank[f] == kNone) result.face_rank[f] = fr++;
        if (result.edge_rank[e] == kNone) result.edge_rank[e] = er++;
    }
    return result;
}

IsoSignature canonical_signature(const SphericalComplex& c, const CellLabels& labels) {
    return canonical_form(c, labels).sig;
}

bool isomorphic(const SphericalComplex& a, const SphericalComplex& b) {
    if (a.vertex_count() != b.vertex_count() || a.edge_count() != b.edge_count() ||
        a.face_count() != b.face_count() || a.halfedge_count() != b.halfedge_count())
        return false;
    return canonical_signature(a) == canonical_signature(b);
}

std::vector<ComplexIso> all_isomorphisms(const SphericalComplex& a, const CellLabels& la,
                                         const SphericalComplex& b, const CellLabels& lb) {
    std::vector<ComplexIso> out;
    if (a.halfedge_count() != b.halfedge_count()) return out;
    Traversal ref;
    traverse(a, la, 0, nullptr, ref);

    SphericalComplex bm = b.mirrored();
    CellLabels lbm = remap_labels_to(b, lb, bm);
    Traversal cur;
    for (int refl = 0; refl < 2; ++refl) {
        const SphericalComplex& bb = refl ? bm : b;
        const CellLabels& ll = refl ? lbm : lb;
        for (Index h0 = 0; h0 < bb.halfedge_count(); ++h0) {
            traverse(bb, ll, h0, nullptr, cur);
            if (cur.code != ref.code) continue;
            ComplexIso iso;
            iso.reflected = refl;
            iso.vertex_map.assign(a.vertex_count(), kNone);
            iso.edge_map.assign(a.edge_count(), kNone);
            iso.face_map.assign(a.face_count(), kNone);
            for (size_t i = 0; i < ref.order.size(); ++i) {
                Index ha = ref.order[i], hb = cur.order[i];
                iso.vertex_map[a.he(ha).origin] = bb.he(hb).origin;
                iso.face_map[a.he(ha).face] = bb.he(hb).face;
                Index eb = bb.he(hb).edge;
                if (refl) eb = *b.edge_index(bb.edge_id(eb));
                iso.edge_map[a.he(ha).edge] = eb;
            }
            out.push_back(std::move(iso));
        }
    }
    return out;
}

}  // namespace polysub
