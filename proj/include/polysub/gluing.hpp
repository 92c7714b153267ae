#pragma once

#include <map>
#include <string>
#include <vector>

#include "polysub/complex.hpp"

namespace polysub {

// Building block of a gluing: a spherical complex plus face/vertex names from
// the spec file.
struct PolyhedronTemplate {
    std::string name;
    SphericalComplex complex;
    std::vector<std::string> face_names;    // by face index
    std::vector<std::string> vertex_names;  // by vertex index

    Index face_by_name(const std::string& n) const;
    Index vertex_by_name(const std::string& n) const;
};

struct FaceSlot {
    Index tmpl = kNone;
    Index face = kNone;
    auto operator<=>(const FaceSlot&) const = default;
};

struct EdgeSlot {
    Index tmpl = kNone;
    Index edge = kNone;
    auto operator<=>(const EdgeSlot&) const = default;
};

struct FacePairing {
    FaceSlot source, target;
    // template-vertex index of source template -> target template; defined on
    // the source face's vertices, kNone elsewhere
    std::vector<Index> vertex_map;
    bool mirror = false;
    int line = 0;
};

struct EdgeClass {
    std::vector<EdgeSlot> members;  // sorted
    int cycle_length = 0;
    bool overridden = false;
};

struct GluingSpec {
    std::vector<PolyhedronTemplate> templates;
    std::vector<FacePairing> pairings;
    std::vector<EdgeClass> edge_classes;
    std::vector<std::vector<Index>> pairing_of;     // [tmpl][face] -> pairing index
    std::vector<std::vector<Index>> edge_class_of;  // [tmpl][edge] -> class index
    std::string provenance;
    std::string source_text;

    Index template_index(const std::string& name) const;
    int cycle_length(Index tmpl, Index edge) const {
        return edge_classes[edge_class_of[tmpl][edge]].cycle_length;
    }
};

// Result of applying a face pairing from a given side.
struct PairImage {
    Index tmpl = kNone;
    Index face = kNone;
    std::vector<Index> vertex_map;  // source-template vertex -> target-template vertex
};
PairImage apply_pairing(const GluingSpec& spec, Index tmpl, Index face);

// Parses the line-oriented gluing spec format.  Throws SyntaxError,
// UnpairedFace, DuplicatePairing, BadBijection, MissingCycleLength,
// InconsistentOverride.
GluingSpec parse_spec(const std::string& text);
GluingSpec parse_spec_file(const std::string& path);

std::string spec_hash(const GluingSpec& spec);  // FNV-1a over the source text

// One named violation with witness cells.
struct Diagnostic {
    std::string condition;
    std::string witness;
};
// Checks the three polyhedron conditions (valence >=3, faces >=3 edges, faces
// meet in at most one edge or a vertex).  Empty result means valid.
std::vector<Diagnostic> validate_polyhedron(const SphericalComplex& c);

struct PredicateResult {
    bool ok = false;
    std::string witness;  // set when ok is false
    explicit operator bool() const { return ok; }
};
// Every face meets every fan not containing it in a vertex, one edge, or two
// contiguous edges.
PredicateResult is_spread_out(const PolyhedronTemplate& p);
// Weaker form: the fan condition restricted to single faces and 2-face fans.
PredicateResult is_relaxed_spread_out(const PolyhedronTemplate& p);

// Recomputes the orbit partition of edge slots under the pairings.
// parse_spec already stores the result; exposed for the orbit oracle tests.
std::vector<EdgeClass> compute_edge_classes(const std::vector<PolyhedronTemplate>& templates,
                                            const std::vector<FacePairing>& pairings);

// All n-cycles: n faces meeting cyclically in n pairwise-disjoint edges,
// reported once up to rotation and reflection.
std::vector<std::vector<Index>> find_n_cycles(const PolyhedronTemplate& p, int n);

enum class Theorem { T31, T41, T42 };

struct HypothesisItem {
    std::string name;
    bool pass = false;
    std::string detail;  // witness on failure, notes (e.g. "relaxed") on success
};
struct HypothesisReport {
    Theorem theorem;
    bool pass = false;
    std::vector<HypothesisItem> items;
};
HypothesisReport check_hypotheses(const GluingSpec& spec, Theorem t);

// Symmetry of the whole gluing: template permutation plus per-template complex
// isomorphisms commuting with all pairings and preserving cycle lengths.
struct SpecAutomorphism {
    std::vector<Index> tmpl_map;
    std::vector<ComplexIso> iso;  // iso[i] maps template i onto template tmpl_map[i]
};
std::vector<SpecAutomorphism> spec_automorphisms(const GluingSpec& spec);

// Edge of a template complex joining two vertex indices; kNone if absent.
Index edge_between(const SphericalComplex& c, Index va, Index vb);

}  // namespace polysub
