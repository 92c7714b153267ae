#pragma once

#include <string>
#include <vector>

#include "polysub/gluing.hpp"

namespace polysub {

using FaceId = std::int64_t;

enum class EdgeStatus { Unburdened, Burdened, Loaded };

struct StageFace {
    FaceId id = -1;
    // boundary cycle, counterclockwise seen from outside the ball; position i
    // corresponds to position i of the owning template face cycle (reversed
    // after position 0 when the instance is reflected)
    std::vector<VertexId> vertices;
    std::vector<EdgeId> edges;  // edges[i] joins vertices[i] and vertices[i+1]
    Index instance = kNone;
    Index template_face = kNone;
    bool operator==(const StageFace&) const = default;
};

struct StageEdge {
    EdgeId id = -1;
    VertexId v1 = -1, v2 = -1;  // v1 < v2
    Index cls = kNone;          // edge class in the spec
    int count = 1;              // adjacent polyhedron instances
    bool operator==(const StageEdge&) const = default;
};

struct StageInstance {
    Index id = kNone;
    Index tmpl = kNone;
    bool reflected = false;  // mirror images traverse template cycles backwards
    bool operator==(const StageInstance&) const = default;
};

// Boundary sphere S(n) of the ball of polyhedra B(n).  Cell ids are global
// and never reused across stages.
struct TilingStage {
    int stage = 0;
    std::vector<StageFace> faces;          // sorted by id
    std::vector<StageEdge> edges;          // sorted by id
    std::vector<StageInstance> instances;  // the outermost layer, sorted by id
    VertexId next_vertex = 0;
    EdgeId next_edge = 0;
    FaceId next_face = 0;
    Index next_instance = 0;
    bool operator==(const TilingStage&) const = default;

    const StageEdge& edge(EdgeId id) const;
    const StageInstance& instance(Index id) const;
    int cycle_length(const GluingSpec& spec, const StageEdge& e) const {
        return spec.edge_classes[e.cls].cycle_length;
    }
    EdgeStatus status(const GluingSpec& spec, const StageEdge& e) const;
};

SphericalComplex to_complex(const TilingStage& stage);

// Template vertex index corresponding to each position of the face's stored
// cycle.
std::vector<Index> face_template_cycle(const GluingSpec& spec, const TilingStage& stage,
                                       const StageFace& f);

TilingStage initial_stage(const GluingSpec& spec, const std::string& base_template);

// One polyhedron gets glued per site: a maximal loaded fan or a single
// unloaded face.
struct GluingSite {
    std::vector<Index> faces;        // indices into stage.faces, chain order
    std::vector<EdgeId> loaded_edges;  // between consecutive faces; closes up for a star
    bool star = false;
};

// Partitions all boundary faces into gluing sites.  Throws WedgeViolation,
// SkewConfiguration.
std::vector<GluingSite> detect_loaded_fans(const GluingSpec& spec, const TilingStage& stage);

// Throws GluingInconsistency, CycleOverflow.
TilingStage grow(const TilingStage& stage, const GluingSpec& spec);

struct StageCheck {
    std::string name;
    bool pass = false;
    std::string witness;
};
struct StageReport {
    bool pass = false;
    std::vector<StageCheck> checks;
};
StageReport verify_stage(const GluingSpec& spec, const TilingStage& stage);

// Independent realization of S(n): enumerates gluing paths from the base
// instance, closes them under the edge-cycle relations, and reads off the
// boundary of the quotient ball.  Throws UnknownTemplate, CapExceeded.
SphericalComplex oracle_boundary(const GluingSpec& spec, const std::string& base_template, int n,
                                 int cap = 3);

}  // namespace polysub
