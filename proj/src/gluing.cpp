#include "polysub/gluing.hpp"

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace polysub {

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_ws(const std::string& s) {
    std::istringstream in(s);
    std::vector<std::string> out;
    std::string tok;
    while (in >> tok) out.push_back(tok);
    return out;
}

std::vector<std::string> split_on(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

bool valid_name(const std::string& s) {
    if (s.empty()) return false;
    for (char c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_') return false;
    return true;
}

[[noreturn]] void syntax(int line, const std::string& what) {
    fail("SyntaxError", "line " + std::to_string(line) + ": " + what);
}

struct UnionFind {
    std::vector<Index> parent;
    explicit UnionFind(Index n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    Index find(Index x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    }
    void unite(Index a, Index b) { parent[find(a)] = find(b); }
};

}  // namespace

Index PolyhedronTemplate::face_by_name(const std::string& n) const {
    for (size_t i = 0; i < face_names.size(); ++i)
        if (face_names[i] == n) return static_cast<Index>(i);
    return kNone;
}

Index PolyhedronTemplate::vertex_by_name(const std::string& n) const {
    for (size_t i = 0; i < vertex_names.size(); ++i)
        if (vertex_names[i] == n) return static_cast<Index>(i);
    return kNone;
}

Index GluingSpec::template_index(const std::string& name) const {
    for (size_t i = 0; i < templates.size(); ++i)
        if (templates[i].name == name) return static_cast<Index>(i);
    return kNone;
}

Index edge_between(const SphericalComplex& c, Index va, Index vb) {
    for (Index h : c.halfedges_out_of(va)) {
        if (c.he(c.he(h).next).origin == vb) return c.he(h).edge;
    }
    return kNone;
}

PairImage apply_pairing(const GluingSpec& spec, Index tmpl, Index face) {
    Index pi = spec.pairing_of[tmpl][face];
    const FacePairing& p = spec.pairings[pi];
    PairImage out;
    if (p.source == FaceSlot{tmpl, face}) {
        out.tmpl = p.target.tmpl;
        out.face = p.target.face;
        out.vertex_map = p.vertex_map;
    } else {
        out.tmpl = p.source.tmpl;
        out.face = p.source.face;
        out.vertex_map.assign(spec.templates[tmpl].complex.vertex_count(), kNone);
        for (size_t v = 0; v < p.vertex_map.size(); ++v)
            if (p.vertex_map[v] != kNone) out.vertex_map[p.vertex_map[v]] = static_cast<Index>(v);
    }
    return out;
}

std::vector<EdgeClass> compute_edge_classes(const std::vector<PolyhedronTemplate>& templates,
                                            const std::vector<FacePairing>& pairings) {
    std::vector<Index> offset(templates.size() + 1, 0);
    for (size_t i = 0; i < templates.size(); ++i)
        offset[i + 1] = offset[i] + templates[i].complex.edge_count();
    UnionFind uf(offset.back());

    for (const FacePairing& p : pairings) {
        const SphericalComplex& src = templates[p.source.tmpl].complex;
        const SphericalComplex& tgt = templates[p.target.tmpl].complex;
        auto cycle = src.face_vertices(p.source.face);
        size_t k = cycle.size();
        for (size_t i = 0; i < k; ++i) {
            Index u = cycle[i], v = cycle[(i + 1) % k];
            Index es = edge_between(src, u, v);
            Index et = edge_between(tgt, p.vertex_map[u], p.vertex_map[v]);
            uf.unite(offset[p.source.tmpl] + es, offset[p.target.tmpl] + et);
        }
    }

    std::map<Index, std::vector<EdgeSlot>> groups;
    for (size_t t = 0; t < templates.size(); ++t)
        for (Index e = 0; e < templates[t].complex.edge_count(); ++e)
            groups[uf.find(offset[t] + e)].push_back({static_cast<Index>(t), e});

    std::vector<EdgeClass> out;
    for (auto& [root, members] : groups) {
        EdgeClass c;
        std::sort(members.begin(), members.end());
        c.members = std::move(members);
        c.cycle_length = static_cast<int>(c.members.size());
        out.push_back(std::move(c));
    }
    std::sort(out.begin(), out.end(),
              [](const EdgeClass& a, const EdgeClass& b) { return a.members[0] < b.members[0]; });
    return out;
}

GluingSpec parse_spec(const std::string& text) {
    struct RawFace {
        std::string name;
        std::vector<std::string> verts;
        int line;
    };
    struct RawTemplate {
        std::string name;
        std::vector<RawFace> faces;
        int line;
    };
    struct RawPair {
        std::string src_t, src_f, tgt_t, tgt_f;
        std::vector<std::pair<std::string, std::string>> map;
        int line;
    };
    struct RawMirror {
        std::string tmpl, face;
        int line;
    };
    struct RawOverride {
        std::string tmpl, face, v1, v2;
        int value;
        int line;
    };

    std::vector<RawTemplate> rtemplates;
    std::vector<RawPair> rpairs;
    std::vector<RawMirror> rmirrors;
    std::vector<RawOverride> roverrides;

    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        if (auto h = raw.find('#'); h != std::string::npos) raw.erase(h);
        std::string line = trim(raw);
        if (line.empty()) continue;
        auto toks = split_ws(line);
        const std::string& kw = toks[0];

        if (kw == "polyhedron") {
            if (toks.size() != 2 || !valid_name(toks[1])) syntax(lineno, "expected: polyhedron <name>");
            for (const auto& t : rtemplates)
                if (t.name == toks[1]) syntax(lineno, "duplicate polyhedron name '" + toks[1] + "'");
            rtemplates.push_back({toks[1], {}, lineno});
        } else if (kw == "face") {
            if (rtemplates.empty()) syntax(lineno, "face outside a polyhedron block");
            auto colon = line.find(':');
            if (colon == std::string::npos) syntax(lineno, "expected: face <name>: v1 v2 ...");
            auto head = split_ws(line.substr(0, colon));
            auto verts = split_ws(line.substr(colon + 1));
            if (head.size() != 2 || !valid_name(head[1])) syntax(lineno, "bad face name");
            if (verts.size() < 3) syntax(lineno, "face needs at least 3 vertices");
            for (const auto& v : verts)
                if (!valid_name(v)) syntax(lineno, "bad vertex label '" + v + "'");
            for (const auto& f : rtemplates.back().faces)
                if (f.name == head[1]) syntax(lineno, "duplicate face name '" + head[1] + "'");
            rtemplates.back().faces.push_back({head[1], verts, lineno});
        } else if (kw == "pair") {
            auto colon = line.find(':');
            if (colon == std::string::npos) syntax(lineno, "expected: pair P.f Q.g : a->b, ...");
            auto head = split_ws(line.substr(0, colon));
            if (head.size() != 3) syntax(lineno, "expected two face slots before ':'");
            auto s = split_on(head[1], '.');
            auto t = split_on(head[2], '.');
            if (s.size() != 2 || t.size() != 2) syntax(lineno, "face slot must be <polyhedron>.<face>");
            RawPair rp{s[0], s[1], t[0], t[1], {}, lineno};
            for (std::string entry : split_on(line.substr(colon + 1), ',')) {
                entry = trim(entry);
                if (entry.empty()) syntax(lineno, "empty map entry");
                auto arrow = entry.find("->");
                if (arrow == std::string::npos) syntax(lineno, "map entry must be a->b");
                std::string a = trim(entry.substr(0, arrow));
                std::string b = trim(entry.substr(arrow + 2));
                if (!valid_name(a) || !valid_name(b)) syntax(lineno, "bad map entry '" + entry + "'");
                rp.map.emplace_back(a, b);
            }
            rpairs.push_back(std::move(rp));
        } else if (kw == "mirror") {
            if (toks.size() != 2) syntax(lineno, "expected: mirror P.f");
            auto s = split_on(toks[1], '.');
            if (s.size() != 2) syntax(lineno, "face slot must be <polyhedron>.<face>");
            rmirrors.push_back({s[0], s[1], lineno});
        } else if (kw == "cyclelength") {
            if (toks.size() != 3) syntax(lineno, "expected: cyclelength P.f.v1-v2 <k>");
            auto parts = split_on(toks[1], '.');
            if (parts.size() != 3) syntax(lineno, "edge slot must be <polyhedron>.<face>.<v1>-<v2>");
            auto vv = split_on(parts[2], '-');
            if (vv.size() != 2) syntax(lineno, "edge slot must name two vertices v1-v2");
            int k = 0;
            try {
                k = std::stoi(toks[2]);
            } catch (...) {
                syntax(lineno, "bad cycle length '" + toks[2] + "'");
            }
            if (k <= 0) syntax(lineno, "cycle length must be positive");
            roverrides.push_back({parts[0], parts[1], vv[0], vv[1], k, lineno});
        } else {
            syntax(lineno, "unknown directive '" + kw + "'");
        }
    }
    if (rtemplates.empty()) syntax(lineno, "no polyhedron blocks");

    GluingSpec spec;
    spec.source_text = text;

    for (const RawTemplate& rt : rtemplates) {
        PolyhedronTemplate pt;
        pt.name = rt.name;
        std::map<std::string, VertexId> vid;
        std::vector<std::vector<VertexId>> cycles;
        for (const RawFace& rf : rt.faces) {
            std::vector<VertexId> cyc;
            for (const auto& vn : rf.verts) {
                auto it = vid.find(vn);
                if (it == vid.end()) {
                    it = vid.emplace(vn, static_cast<VertexId>(pt.vertex_names.size())).first;
                    pt.vertex_names.push_back(vn);
                }
                cyc.push_back(it->second);
            }
            std::set<VertexId> uniq(cyc.begin(), cyc.end());
            if (uniq.size() != cyc.size()) syntax(rf.line, "repeated vertex in face cycle");
            cycles.push_back(std::move(cyc));
            pt.face_names.push_back(rf.name);
        }
        if (cycles.empty()) syntax(rt.line, "polyhedron '" + rt.name + "' has no faces");
        // vertex ids are assigned densely in first-appearance order, so
        // internal indices coincide with them
        pt.complex = SphericalComplex::build(cycles);
        spec.templates.push_back(std::move(pt));
    }

    auto resolve_slot = [&](const std::string& tn, const std::string& fn, int line) -> FaceSlot {
        Index t = spec.template_index(tn);
        if (t == kNone) syntax(line, "unknown polyhedron '" + tn + "'");
        Index f = spec.templates[t].face_by_name(fn);
        if (f == kNone) syntax(line, "unknown face '" + tn + "." + fn + "'");
        return {t, f};
    };

    spec.pairing_of.resize(spec.templates.size());
    for (size_t t = 0; t < spec.templates.size(); ++t)
        spec.pairing_of[t].assign(spec.templates[t].complex.face_count(), kNone);

    auto claim_slot = [&](FaceSlot s, Index pi, int line) {
        Index& cell = spec.pairing_of[s.tmpl][s.face];
        if (cell != kNone)
            fail("DuplicatePairing", "line " + std::to_string(line) + ": face " +
                                         spec.templates[s.tmpl].name + "." +
                                         spec.templates[s.tmpl].face_names[s.face] +
                                         " is already paired");
        cell = pi;
    };

    for (const RawPair& rp : rpairs) {
        FaceSlot s = resolve_slot(rp.src_t, rp.src_f, rp.line);
        FaceSlot t = resolve_slot(rp.tgt_t, rp.tgt_f, rp.line);
        const SphericalComplex& sc = spec.templates[s.tmpl].complex;
        const SphericalComplex& tc = spec.templates[t.tmpl].complex;
        auto scyc = sc.face_vertices(s.face);
        auto tcyc = tc.face_vertices(t.face);
        std::string where = "line " + std::to_string(rp.line) + ": ";
        if (scyc.size() != tcyc.size())
            fail("BadBijection", where + "faces have different sizes");

        FacePairing p;
        p.source = s;
        p.target = t;
        p.line = rp.line;
        p.vertex_map.assign(sc.vertex_count(), kNone);
        for (const auto& [an, bn] : rp.map) {
            Index a = spec.templates[s.tmpl].vertex_by_name(an);
            Index b = spec.templates[t.tmpl].vertex_by_name(bn);
            if (a == kNone || b == kNone)
                fail("BadBijection", where + "unknown vertex in map entry " + an + "->" + bn);
            if (std::find(scyc.begin(), scyc.end(), a) == scyc.end())
                fail("BadBijection", where + "vertex " + an + " is not on the source face");
            if (std::find(tcyc.begin(), tcyc.end(), b) == tcyc.end())
                fail("BadBijection", where + "vertex " + bn + " is not on the target face");
            if (p.vertex_map[a] != kNone)
                fail("BadBijection", where + "vertex " + an + " mapped twice");
            p.vertex_map[a] = b;
        }
        for (Index v : scyc)
            if (p.vertex_map[v] == kNone)
                fail("BadBijection", where + "vertex " +
                                         spec.templates[s.tmpl].vertex_names[v] + " is not mapped");
        {
            std::set<Index> img;
            for (Index v : scyc) img.insert(p.vertex_map[v]);
            if (img.size() != scyc.size()) fail("BadBijection", where + "map is not injective");
        }
        // orientation reversal: the image of the source cycle must be the
        // target cycle read backwards (up to rotation)
        size_t k = scyc.size();
        size_t pos = std::find(tcyc.begin(), tcyc.end(), p.vertex_map[scyc[0]]) - tcyc.begin();
        for (size_t i = 0; i < k; ++i) {
            if (p.vertex_map[scyc[i]] != tcyc[(pos + k - i % k) % k])
                fail("BadBijection", where + "bijection does not reverse the boundary orientation");
        }
        if (s == t) {
            for (Index v : scyc)
                if (p.vertex_map[p.vertex_map[v]] != v)
                    fail("BadBijection", where + "self-pairing is not an involution");
        }

        Index pi = static_cast<Index>(spec.pairings.size());
        claim_slot(s, pi, rp.line);
        if (!(t == s)) claim_slot(t, pi, rp.line);
        spec.pairings.push_back(std::move(p));
    }

    for (const RawMirror& rm : rmirrors) {
        FaceSlot s = resolve_slot(rm.tmpl, rm.face, rm.line);
        FacePairing p;
        p.source = p.target = s;
        p.mirror = true;
        p.line = rm.line;
        const SphericalComplex& sc = spec.templates[s.tmpl].complex;
        p.vertex_map.assign(sc.vertex_count(), kNone);
        for (Index v : sc.face_vertices(s.face)) p.vertex_map[v] = v;
        Index pi = static_cast<Index>(spec.pairings.size());
        claim_slot(s, pi, rm.line);
        spec.pairings.push_back(std::move(p));
    }

    for (size_t t = 0; t < spec.templates.size(); ++t)
        for (Index f = 0; f < spec.templates[t].complex.face_count(); ++f)
            if (spec.pairing_of[t][f] == kNone)
                fail("UnpairedFace", "face " + spec.templates[t].name + "." +
                                         spec.templates[t].face_names[f] + " has no pairing");

    spec.edge_classes = compute_edge_classes(spec.templates, spec.pairings);
    spec.edge_class_of.resize(spec.templates.size());
    for (size_t t = 0; t < spec.templates.size(); ++t)
        spec.edge_class_of[t].assign(spec.templates[t].complex.edge_count(), kNone);
    for (size_t c = 0; c < spec.edge_classes.size(); ++c)
        for (const EdgeSlot& s : spec.edge_classes[c].members)
            spec.edge_class_of[s.tmpl][s.edge] = static_cast<Index>(c);

    // classes touching a mirror face must get their lengths from overrides
    std::vector<bool> mirror_incident(spec.edge_classes.size(), false);
    for (const FacePairing& p : spec.pairings) {
        if (!p.mirror) continue;
        const SphericalComplex& c = spec.templates[p.source.tmpl].complex;
        for (Index e : c.face_edges(p.source.face))
            mirror_incident[spec.edge_class_of[p.source.tmpl][e]] = true;
    }

    for (const RawOverride& ro : roverrides) {
        FaceSlot s = resolve_slot(ro.tmpl, ro.face, ro.line);
        const PolyhedronTemplate& pt = spec.templates[s.tmpl];
        Index v1 = pt.vertex_by_name(ro.v1);
        Index v2 = pt.vertex_by_name(ro.v2);
        if (v1 == kNone || v2 == kNone) syntax(ro.line, "unknown vertex in edge slot");
        Index e = edge_between(pt.complex, v1, v2);
        if (e == kNone) syntax(ro.line, "no edge " + ro.v1 + "-" + ro.v2);
        auto [fa, fb] = pt.complex.edge_faces(e);
        if (fa != s.face && fb != s.face)
            syntax(ro.line, "edge " + ro.v1 + "-" + ro.v2 + " is not on face " + ro.face);
        Index ci = spec.edge_class_of[s.tmpl][e];
        EdgeClass& cls = spec.edge_classes[ci];
        std::string where = "line " + std::to_string(ro.line) + ": ";
        if (!mirror_incident[ci])
            fail("InconsistentOverride",
                 where + "cycle length overrides are only allowed on mirror-incident edges");
        if (ro.value < static_cast<int>(cls.members.size()))
            fail("InconsistentOverride", where + "override " + std::to_string(ro.value) +
                                             " is below the orbit size " +
                                             std::to_string(cls.members.size()));
        if (cls.overridden && cls.cycle_length != ro.value)
            fail("InconsistentOverride", where + "class already overridden to " +
                                             std::to_string(cls.cycle_length));
        cls.cycle_length = ro.value;
        cls.overridden = true;
    }

    for (size_t c = 0; c < spec.edge_classes.size(); ++c) {
        if (mirror_incident[c] && !spec.edge_classes[c].overridden) {
            const EdgeSlot& s = spec.edge_classes[c].members[0];
            const PolyhedronTemplate& pt = spec.templates[s.tmpl];
            auto [a, b] = pt.complex.edge_endpoints(s.edge);
            fail("MissingCycleLength", "mirror-incident edge " + pt.name + " " +
                                           pt.vertex_names[a] + "-" + pt.vertex_names[b] +
                                           " needs a cyclelength directive");
        }
    }
    return spec;
}

GluingSpec parse_spec_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) fail("IoError", "cannot read " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    GluingSpec spec = parse_spec(buf.str());
    spec.provenance = path;
    return spec;
}

std::string spec_hash(const GluingSpec& spec) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : spec.source_text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::vector<Diagnostic> validate_polyhedron(const SphericalComplex& c) {
    std::vector<Diagnostic> out;
    if (!c.is_sphere()) {
        out.push_back({"closed-sphere", "complex is not a closed sphere"});
        return out;
    }
    for (Index v = 0; v < c.vertex_count(); ++v)
        if (c.valence(v) < 3)
            out.push_back({"valence", "vertex " + std::to_string(c.vertex_id(v)) +
                                          " has valence " + std::to_string(c.valence(v))});
    for (Index f = 0; f < c.face_count(); ++f)
        if (c.face_size(f) < 3)
            out.push_back({"face-size", "face " + std::to_string(f) + " has " +
                                            std::to_string(c.face_size(f)) + " edges"});
    for (Index f = 0; f < c.face_count(); ++f) {
        std::vector<bool> inf(c.vertex_count(), false);
        for (Index v : c.face_vertices(f)) inf[v] = true;
        for (Index g = f + 1; g < c.face_count(); ++g) {
            auto se = c.shared_edges(f, g);
            int sv = 0;
            for (Index v : c.face_vertices(g)) sv += inf[v];
            std::string names = "faces " + std::to_string(f) + "," + std::to_string(g);
            if (se.size() >= 2)
                out.push_back({"face-intersection",
                               names + " share " + std::to_string(se.size()) + " edges"});
            else if (se.size() == 1 && sv > 2)
                out.push_back({"face-intersection",
                               names + " share an edge plus extra vertices"});
            else if (se.empty() && sv > 1)
                out.push_back({"face-intersection",
                               names + " share " + std::to_string(sv) + " vertices"});
        }
    }
    return out;
}

namespace {

// intersection of a face's closure with a fan's closure, as cell sets
struct Meet {
    std::vector<Index> edges;
    std::vector<Index> verts;
};

Meet meet_face_fan(const SphericalComplex& c, Index face, const Fan& fan) {
    std::vector<bool> fe(c.edge_count(), false), fv(c.vertex_count(), false);
    for (Index e : c.face_edges(face)) fe[e] = true;
    for (Index v : c.face_vertices(face)) fv[v] = true;
    std::vector<bool> be(c.edge_count(), false), bv(c.vertex_count(), false);
    Meet m;
    for (Index g : fan.faces) {
        for (Index e : c.face_edges(g))
            if (fe[e] && !be[e]) {
                be[e] = true;
                m.edges.push_back(e);
            }
        for (Index v : c.face_vertices(g))
            if (fv[v] && !bv[v]) {
                bv[v] = true;
                m.verts.push_back(v);
            }
    }
    return m;
}

bool edges_contiguous(const SphericalComplex& c, Index e1, Index e2) {
    auto [a1, b1] = c.edge_endpoints(e1);
    auto [a2, b2] = c.edge_endpoints(e2);
    return a1 == a2 || a1 == b2 || b1 == a2 || b1 == b2;
}

// the shared edges are at most two and contiguous; isolated shared vertices
// are permitted (the octahedron meets some 3-fans in two separate vertices)
bool edge_meet_ok(const SphericalComplex& c, const Meet& m) {
    if (m.edges.size() > 2) return false;
    if (m.edges.size() == 2) return edges_contiguous(c, m.edges[0], m.edges[1]);
    return true;
}

// the whole intersection is connected: a vertex, one edge, or two contiguous
// edges, with no stray vertices
bool connected_meet_ok(const SphericalComplex& c, const Meet& m) {
    if (m.edges.empty()) return m.verts.size() <= 1;
    if (m.edges.size() == 1) return m.verts.size() == 2;
    if (m.edges.size() == 2)
        return edges_contiguous(c, m.edges[0], m.edges[1]) && m.verts.size() == 3;
    return false;
}

std::string fan_desc(const PolyhedronTemplate& p, const Fan& fan) {
    if (fan.size() == 1) return "face " + p.face_names[fan.faces[0]];
    std::string s = std::string(fan.star ? "star(" : "fan(") + p.vertex_names[fan.center] + ":";
    for (Index f : fan.faces) s += " " + p.face_names[f];
    return s + ")";
}

PredicateResult spread_out_impl(const PolyhedronTemplate& p, size_t max_fan, bool connected) {
    const SphericalComplex& c = p.complex;
    auto fans = enumerate_fans(c);
    for (Index f = 0; f < c.face_count(); ++f) {
        for (const Fan& fan : fans) {
            if (fan.size() > max_fan) continue;
            if (std::find(fan.faces.begin(), fan.faces.end(), f) != fan.faces.end()) continue;
            Meet m = meet_face_fan(c, f, fan);
            if (!(connected ? connected_meet_ok(c, m) : edge_meet_ok(c, m))) {
                return {false, "face " + p.face_names[f] + " meets " + fan_desc(p, fan) + " in " +
                                   std::to_string(m.edges.size()) + " edges / " +
                                   std::to_string(m.verts.size()) + " vertices"};
            }
        }
    }
    return {true, ""};
}

}  // namespace

PredicateResult is_spread_out(const PolyhedronTemplate& p) {
    return spread_out_impl(p, std::numeric_limits<size_t>::max(), false);
}

PredicateResult is_relaxed_spread_out(const PolyhedronTemplate& p) {
    return spread_out_impl(p, 2, true);
}

std::vector<std::vector<Index>> find_n_cycles(const PolyhedronTemplate& p, int n) {
    const SphericalComplex& c = p.complex;
    std::vector<std::vector<Index>> out;
    if (n < 3) return out;

    // faces adjacent along exactly one edge
    Index nf = c.face_count();
    auto link = [&](Index f, Index g) -> Index {
        auto se = c.shared_edges(f, g);
        return se.size() == 1 ? se[0] : kNone;
    };
    auto disjoint = [&](Index e1, Index e2) {
        auto [a1, b1] = c.edge_endpoints(e1);
        auto [a2, b2] = c.edge_endpoints(e2);
        return a1 != a2 && a1 != b2 && b1 != a2 && b1 != b2;
    };

    std::vector<Index> path, edges;
    std::vector<bool> used(nf, false);

    auto dfs = [&](auto&& self, Index depth) -> void {
        if (depth == n) {
            Index e = link(path.back(), path[0]);
            if (e == kNone) return;
            for (Index e2 : edges)
                if (!disjoint(e, e2)) return;
            if (path[1] < path.back()) {  // one representative per reflection
                auto cyc = path;
                out.push_back(cyc);
            }
            return;
        }
        for (Index g = path[0] + 1; g < nf; ++g) {
            if (used[g]) continue;
            Index e = link(path.back(), g);
            if (e == kNone) continue;
            bool ok = true;
            for (Index e2 : edges)
                if (!disjoint(e, e2)) {
                    ok = false;
                    break;
                }
            if (!ok) continue;
            used[g] = true;
            path.push_back(g);
            edges.push_back(e);
            self(self, depth + 1);
            edges.pop_back();
            path.pop_back();
            used[g] = false;
        }
    };

    for (Index f = 0; f < nf; ++f) {
        path = {f};
        edges.clear();
        std::fill(used.begin(), used.end(), false);
        used[f] = true;
        dfs(dfs, 1);
    }
    return out;
}

HypothesisReport check_hypotheses(const GluingSpec& spec, Theorem t) {
    HypothesisReport rep;
    rep.theorem = t;
    auto add = [&](const std::string& name, bool pass, const std::string& detail) {
        rep.items.push_back({name, pass, detail});
    };

    for (const PolyhedronTemplate& pt : spec.templates) {
        auto diags = validate_polyhedron(pt.complex);
        add("polyhedron:" + pt.name, diags.empty(),
            diags.empty() ? "" : diags[0].condition + ": " + diags[0].witness);
    }

    for (const PolyhedronTemplate& pt : spec.templates) {
        PredicateResult strict = is_spread_out(pt);
        if (t == Theorem::T41) {
            add("spread-out:" + pt.name, strict.ok, strict.witness);
        } else if (strict.ok) {
            add("spread-out:" + pt.name, true, "");
        } else {
            PredicateResult relaxed = is_relaxed_spread_out(pt);
            add("spread-out:" + pt.name, relaxed.ok,
                relaxed.ok ? "relaxed" : relaxed.witness);
        }
    }

    {
        bool ok = true;
        std::string wit;
        for (const EdgeClass& c : spec.edge_classes) {
            int len = c.cycle_length;
            bool good = (t == Theorem::T31)   ? (len % 2 == 0 && len >= 4)
                        : (t == Theorem::T41) ? (len == 4)
                                              : (len % 2 == 0 && len > 2);
            if (!good) {
                ok = false;
                const EdgeSlot& s = c.members[0];
                const PolyhedronTemplate& pt = spec.templates[s.tmpl];
                auto [a, b] = pt.complex.edge_endpoints(s.edge);
                wit = "edge " + pt.name + " " + pt.vertex_names[a] + "-" + pt.vertex_names[b] +
                      " has cycle length " + std::to_string(len);
                break;
            }
        }
        add("cycle-lengths", ok, wit);
    }

    if (t == Theorem::T41) {
        bool ok = true;
        std::string wit;
        for (const PolyhedronTemplate& pt : spec.templates)
            for (Index v = 0; ok && v < pt.complex.vertex_count(); ++v)
                if (pt.complex.valence(v) != 3) {
                    ok = false;
                    wit = "vertex " + pt.name + "." + pt.vertex_names[v] + " has valence " +
                          std::to_string(pt.complex.valence(v));
                }
        add("valence-3", ok, wit);

        for (int n : {3, 4}) {
            bool clean = true;
            std::string wit2;
            for (const PolyhedronTemplate& pt : spec.templates) {
                auto cycles = find_n_cycles(pt, n);
                if (!cycles.empty()) {
                    clean = false;
                    wit2 = pt.name + " has " + std::to_string(cycles.size()) + " " +
                           std::to_string(n) + "-cycles, e.g. faces";
                    for (Index f : cycles[0]) wit2 += " " + pt.face_names[f];
                    break;
                }
            }
            add("no-" + std::to_string(n) + "-cycles", clean, wit2);
        }
    }

    if (t == Theorem::T42) {
        bool all_val = true;
        std::string val_wit;
        for (const PolyhedronTemplate& pt : spec.templates)
            for (Index v = 0; all_val && v < pt.complex.vertex_count(); ++v)
                if (pt.complex.valence(v) <= 3) {
                    all_val = false;
                    val_wit = "vertex " + pt.name + "." + pt.vertex_names[v] + " has valence " +
                              std::to_string(pt.complex.valence(v));
                }
        bool all_len = true;
        std::string len_wit;
        for (const EdgeClass& c : spec.edge_classes)
            if (c.cycle_length <= 4) {
                all_len = false;
                len_wit = "a cycle length of " + std::to_string(c.cycle_length);
                break;
            }
        add("valence-or-length", all_val || all_len,
            all_val || all_len ? (all_val ? "valence>3" : "length>4")
                               : val_wit + "; " + len_wit);
    }

    rep.pass = std::all_of(rep.items.begin(), rep.items.end(),
                           [](const HypothesisItem& i) { return i.pass; });
    return rep;
}

std::vector<SpecAutomorphism> spec_automorphisms(const GluingSpec& spec) {
    size_t nt = spec.templates.size();
    std::vector<SpecAutomorphism> out;

    std::vector<Index> perm(nt);
    std::iota(perm.begin(), perm.end(), 0);
    std::sort(perm.begin(), perm.end());

    auto compatible = [&](const SpecAutomorphism& a) {
        for (const FacePairing& p : spec.pairings) {
            Index st = a.tmpl_map[p.source.tmpl];
            Index sf = a.iso[p.source.tmpl].face_map[p.source.face];
            Index qi = spec.pairing_of[st][sf];
            const FacePairing& q = spec.pairings[qi];
            if (q.mirror != p.mirror) return false;
            FaceSlot timg{a.tmpl_map[p.target.tmpl], a.iso[p.target.tmpl].face_map[p.target.face]};
            bool forward = (q.source == FaceSlot{st, sf});
            if ((forward ? q.target : q.source) != timg) return false;
            const auto& scyc = spec.templates[p.source.tmpl].complex.face_vertices(p.source.face);
            for (Index v : scyc) {
                Index lhs = a.iso[p.target.tmpl].vertex_map[p.vertex_map[v]];
                Index sv = a.iso[p.source.tmpl].vertex_map[v];
                Index rhs;
                if (forward) {
                    rhs = q.vertex_map[sv];
                } else {
                    rhs = kNone;
                    for (size_t w = 0; w < q.vertex_map.size(); ++w)
                        if (q.vertex_map[w] == sv) {
                            rhs = static_cast<Index>(w);
                            break;
                        }
                }
                if (lhs != rhs) return false;
            }
        }
        for (size_t ti = 0; ti < nt; ++ti)
            for (Index e = 0; e < spec.templates[ti].complex.edge_count(); ++e)
                if (spec.cycle_length(static_cast<Index>(ti), e) !=
                    spec.cycle_length(a.tmpl_map[ti], a.iso[ti].edge_map[e]))
                    return false;
        return true;
    };

    do {
        bool shape_ok = true;
        std::vector<std::vector<ComplexIso>> choices(nt);
        for (size_t i = 0; i < nt && shape_ok; ++i) {
            choices[i] = all_isomorphisms(spec.templates[i].complex, {},
                                          spec.templates[perm[i]].complex, {});
            if (choices[i].empty()) shape_ok = false;
        }
        if (!shape_ok) continue;

        std::vector<size_t> pick(nt, 0);
        while (true) {
            SpecAutomorphism a;
            a.tmpl_map = perm;
            for (size_t i = 0; i < nt; ++i) a.iso.push_back(choices[i][pick[i]]);
            if (compatible(a)) out.push_back(std::move(a));
            size_t i = 0;
            for (; i < nt; ++i) {
                if (++pick[i] < choices[i].size()) break;
                pick[i] = 0;
            }
            if (i == nt) break;
        }
    } while (std::next_permutation(perm.begin(), perm.end()));

    return out;
}

}  // namespace polysub
