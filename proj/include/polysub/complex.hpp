#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "polysub/errors.hpp"

namespace polysub {

using VertexId = std::int64_t;  // external vertex id, stable across growth stages
using EdgeId = std::int64_t;    // external edge id
using Index = std::int32_t;     // dense internal index
inline constexpr Index kNone = -1;

struct HalfEdge {
    Index origin = kNone;  // internal vertex index
    Index face = kNone;
    Index next = kNone;    // next half-edge in the face cycle
    Index twin = kNone;    // kNone on a patch boundary
    Index edge = kNone;    // undirected edge index
};

struct FaceInput {
    std::vector<VertexId> vertices;
    std::vector<EdgeId> edges;  // optional; edges[i] joins vertices[i] and vertices[i+1]
};

// Cell complex on the 2-sphere (or a disk patch when some edges are unpaired),
// stored as half-edge records with dense indices.  Immutable after build.
class SphericalComplex {
public:
    SphericalComplex() = default;

    // Faces given as cyclic vertex-id lists; twins matched by shared vertex
    // pairs traversed in opposite directions.
    // Throws NonManifoldEdge, OrientationMismatch, Disconnected.
    static SphericalComplex build(const std::vector<std::vector<VertexId>>& face_cycles);

    // Same, but twins are matched by explicit edge ids.  Needed when the
    // tiling contains distinct edges with identical endpoints.
    static SphericalComplex build_with_edges(const std::vector<FaceInput>& faces);

    Index vertex_count() const { return static_cast<Index>(vertex_ids_.size()); }
    Index edge_count() const { return static_cast<Index>(edge_he_.size()); }
    Index face_count() const { return static_cast<Index>(face_he_.size()); }
    Index halfedge_count() const { return static_cast<Index>(he_.size()); }

    bool has_boundary() const { return has_boundary_; }
    bool is_sphere() const;  // closed, connected, chi == 2
    int euler_characteristic() const {
        return vertex_count() - edge_count() + face_count();
    }

    const HalfEdge& he(Index h) const { return he_[h]; }
    Index prev(Index h) const { return prev_[h]; }
    // Next half-edge out of the same origin vertex (consistent rotation);
    // kNone when the walk crosses a patch boundary.
    Index rotation(Index h) const {
        Index p = prev_[h];
        return he_[p].twin;
    }

    VertexId vertex_id(Index v) const { return vertex_ids_[v]; }
    EdgeId edge_id(Index e) const { return edge_ids_[e]; }
    std::optional<Index> vertex_index(VertexId id) const;
    std::optional<Index> edge_index(EdgeId id) const;

    Index face_halfedge(Index f) const { return face_he_[f]; }
    Index face_size(Index f) const { return face_size_[f]; }
    std::vector<Index> face_halfedges(Index f) const;
    std::vector<Index> face_vertices(Index f) const;      // internal indices
    std::vector<VertexId> face_vertex_ids(Index f) const;
    std::vector<Index> face_edges(Index f) const;

    Index edge_halfedge(Index e) const { return edge_he_[e]; }
    std::pair<Index, Index> edge_endpoints(Index e) const;  // internal, lesser first
    // The two faces bordering an edge (second kNone on a patch boundary).
    std::pair<Index, Index> edge_faces(Index e) const;

    Index vertex_halfedge(Index v) const { return vertex_he_[v]; }
    Index valence(Index v) const { return valence_[v]; }
    bool vertex_on_boundary(Index v) const;
    // Faces around a vertex in rotation order; cyclic for interior vertices,
    // boundary-to-boundary for patch boundary vertices.
    std::vector<Index> faces_around_vertex(Index v) const;
    std::vector<Index> halfedges_out_of(Index v) const;  // rotation order

    // Edge shared by two faces; kNone if none.  (A polyhedron has at most one.)
    Index shared_edge(Index f1, Index f2) const;
    std::vector<Index> shared_edges(Index f1, Index f2) const;

    // Complex with every face cycle reversed.  Vertex/face indices are
    // preserved; edges are matched through edge ids.
    SphericalComplex mirrored() const;

private:
    static SphericalComplex assemble(const std::vector<FaceInput>& faces, bool edges_explicit);

    std::vector<HalfEdge> he_;
    std::vector<Index> prev_;
    std::vector<VertexId> vertex_ids_;  // ascending
    std::vector<EdgeId> edge_ids_;      // creation order
    std::vector<Index> vertex_he_;      // some outgoing half-edge
    std::vector<Index> face_he_;
    std::vector<Index> edge_he_;
    std::vector<Index> valence_;
    std::vector<Index> face_size_;
    std::vector<std::pair<EdgeId, Index>> edge_lookup_;  // sorted by id
    bool has_boundary_ = false;
    bool connected_ = false;
};

// A chain of faces around a vertex; a single face is a fan of size 1 and
// carries no center.
struct Fan {
    Index center = kNone;
    std::vector<Index> faces;
    bool star = false;

    size_t size() const { return faces.size(); }
};

// All fans of a closed complex: one size-1 fan per face, then for each vertex
// every cyclically contiguous chain of >=2 faces including the full star.
std::vector<Fan> enumerate_fans(const SphericalComplex& c);

// Optional per-cell labels feeding the canonical signature; empty vectors mean
// unlabeled.
struct CellLabels {
    std::vector<std::string> face;
    std::vector<std::string> edge;
    std::vector<std::string> vertex;
};

struct IsoSignature {
    std::string bytes;
    auto operator<=>(const IsoSignature&) const = default;
};

// Canonical cell numbering attached to a signature (first-visit order of the
// minimal traversal).
struct CanonicalForm {
    IsoSignature sig;
    std::vector<Index> vertex_rank;
    std::vector<Index> edge_rank;
    std::vector<Index> face_rank;
    bool reflected = false;
};

// Signature invariant under internal relabeling, sensitive to the supplied
// labels; orientation-reversing isomorphisms are admitted.
IsoSignature canonical_signature(const SphericalComplex& c, const CellLabels& labels = {});
CanonicalForm canonical_form(const SphericalComplex& c, const CellLabels& labels = {});

bool isomorphic(const SphericalComplex& a, const SphericalComplex& b);

// A cell-preserving isomorphism a -> b.
struct ComplexIso {
    std::vector<Index> vertex_map;
    std::vector<Index> edge_map;
    std::vector<Index> face_map;
    bool reflected = false;
};

// All label-preserving isomorphisms between two complexes.
std::vector<ComplexIso> all_isomorphisms(const SphericalComplex& a, const CellLabels& la,
                                         const SphericalComplex& b, const CellLabels& lb);

}  // namespace polysub
