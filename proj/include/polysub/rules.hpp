#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "polysub/growth.hpp"

namespace polysub {

// ---------------------------------------------------------------------------
// Replacement rules: the finite catalog of gluing-site types together with
// the patch each type receives when its polyhedron is glued on.

struct FanTypeInfo {
    int id = -1;
    std::string key;  // canonical site descriptor
    int size = 0;
    bool star = false;
    int boundary_len = 0;  // fan boundary cycle length
    int patch_faces = 0;   // exposed faces of the glued polyhedron
};

struct ReplacementRule {
    std::string base;
    std::string spec_hash;
    int stages_used = 0;
    std::vector<FanTypeInfo> types;
    std::map<std::string, int> index;
    std::vector<std::set<int>> children;  // observed site types inside each type's patch
};

// Canonical key of an undecorated gluing site, invariant under fan traversal
// symmetries and the automorphisms of the gluing.
std::string fan_type_key(const GluingSpec& spec, const TilingStage& stage, const GluingSite& site);

// Grows stages until a full stage introduces no new site type.
// Throws NotClosedWithinCap when max_stages is exhausted first.
ReplacementRule derive_replacement_rule(const GluingSpec& spec, const std::string& base_template,
                                        int max_stages);

// ---------------------------------------------------------------------------
// Decorated tilings: stages plus added lines (chords and midpoint nodes) that
// carry the previous stage's buried cells, making replacement a subdivision.

struct Node {
    char kind = 0;          // 'v' stage vertex, 'm' midpoint of a stage edge, 'j' junction
    std::int64_t id = -1;   // vertex id / edge id / junction id
    auto operator<=>(const Node&) const = default;
};

struct Segment {  // added chord crossing one face
    std::int64_t id = -1;
    FaceId face = -1;
    Node a, b;
};

struct Junction {  // added interior point where chords meet
    std::int64_t id = -1;
    FaceId face = -1;
};

struct ChainItem {
    char kind = 0;        // 'e' stage edge, 's' overlay segment
    std::int64_t id = -1;
    auto operator<=>(const ChainItem&) const = default;
};

struct Chain {  // nodes.size() == items.size() + 1
    std::vector<Node> nodes;
    std::vector<ChainItem> items;
};

struct Overlay {
    std::vector<Segment> segments;    // sorted by id
    std::vector<Junction> junctions;  // sorted by id
    std::set<EdgeId> midpoints;       // edges carrying a midpoint node (at most one)
    std::int64_t next_segment = 0;
    std::int64_t next_junction = 0;

    const Segment& segment(std::int64_t id) const;
};

struct DecoratedStage {
    TilingStage stage;
    Overlay overlay;
};

// Images of the cells that disappear in one subdivision step; surviving cells
// map to themselves and are not listed.
struct StepEmbedding {
    std::map<VertexId, Node> vertex_image;          // buried fan centers
    std::map<EdgeId, Chain> edge_image;             // buried loaded edges
    std::map<EdgeId, Node> midpoint_image;          // midpoints of buried edges
    std::map<std::int64_t, Chain> segment_image;    // previous overlay segments
    std::map<std::int64_t, Node> junction_image;    // previous junctions
    std::map<FaceId, std::vector<FaceId>> region;   // child faces replacing each face
    std::map<FaceId, std::vector<FaceId>> crossed;  // chain-crossed child faces per face
};

// ---------------------------------------------------------------------------
// Subdivision rules.

enum class SubdivisionMethod { Auto, T41, T42, Fixture };

struct TileEntry {
    int id = -1;
    std::string key;       // canonical decorated site descriptor
    std::string case_tag;  // I..VII, t42-single, t42-pair, fixture-*
    int fan_size = 0;
    bool star = false;
    int boundary_len = 0;
    int decorations = 0;  // segments decorating the parent site
    int patch_faces = 0;
    int added_segments = 0;  // fresh segments in the subdivision
    bool identity = false;   // subdivision preserves the cell count of the site
    bool checks_pass = true;  // per-occurrence embedding checks, conjoined
    std::string check_witness;
    std::set<int> children;
};

struct SubdivisionRule {
    SubdivisionMethod method = SubdivisionMethod::Auto;
    std::string base;
    std::string spec_hash;
    int stages_used = 0;
    bool closed = false;
    std::vector<TileEntry> types;
    std::map<std::string, int> index;
};

std::string tile_type_key(const GluingSpec& spec, const DecoratedStage& d, const GluingSite& site);

// The exposed part of one glued instance in a grown stage.
struct PatchView {
    const TilingStage* child = nullptr;
    Index instance = kNone;
    std::vector<Index> faces;  // indices into child->faces
    std::set<EdgeId> boundary_edges;
    std::set<VertexId> boundary_vertices;
    std::set<EdgeId> interior_edges;
    std::set<FaceId> boundary_faces;  // patch faces carrying a boundary edge
};

PatchView patch_view(const TilingStage& child, Index instance);

enum class PathMode { VertexEdges, MidpointDisjoint, Mixed };

// Replacement path search inside a patch.  VertexEdges connects two vertices
// through interior edges; MidpointDisjoint chains fresh chords through
// midpoints of pairwise-disjoint interior edges, crossing no face twice and
// touching boundary faces only at the ends; Mixed starts and ends at vertices
// but routes through midpoints.  Fresh chords carry item id -1 and their host
// face in `hosts`.  Shortest path, ties broken by lexicographic cell ids.
// Throws PathNotFound.
struct PathResult {
    Chain chain;
    std::vector<FaceId> hosts;  // host face per fresh chord item, kNone for edges
};
PathResult interior_path(const PatchView& patch, Node from, Node to, PathMode mode,
                         const std::set<FaceId>& avoid_faces = {},
                         const std::set<EdgeId>& avoid_edges = {});

// One decorated growth step.  If catalog is non-null, site types are entered
// into it (throws ClosureExplosion past 500 types); when require_known is set,
// unseen types throw UntypedFace instead.
struct StepResult {
    DecoratedStage child;
    StepEmbedding embedding;
    std::vector<GluingSite> sites;
    std::vector<int> site_types;   // catalog ids, parallel to sites
    std::vector<bool> site_fresh;  // first occurrence of the type
    Index first_instance = kNone;  // site k glued as instance first_instance + k
    std::vector<std::vector<FaceId>> site_faces;  // parent face ids per site
};
StepResult subdivide_once(const GluingSpec& spec, const DecoratedStage& d, SubdivisionMethod method,
                          SubdivisionRule* catalog, bool require_known = false);

// Derives the full subdivision rule by iterating subdivide_once until a
// stage introduces no new tile type.  Auto picks T42 when its hypotheses
// pass, else T41, else the built-in fixture method; errors NoMethodApplies.
SubdivisionRule convert_to_subdivision(const ReplacementRule& rrule, const GluingSpec& spec,
                                       SubdivisionMethod method, int max_stages = 12);

struct VerifyReport {
    bool pass = false;
    std::vector<StageCheck> checks;
};
VerifyReport verify_subdivision(const SubdivisionRule& srule);

DecoratedStage subdivide_tiling(const SubdivisionRule& srule, const GluingSpec& spec,
                                const DecoratedStage& tiling, int steps);

// Composable nested image of one face across several subdivision steps.
struct NestedImage {
    std::set<FaceId> faces;          // uncrossed region
    std::set<FaceId> crossed;        // chain-crossed faces astride the boundary
    std::vector<Chain> boundary;     // image of the face's boundary edges, in order
};
NestedImage initial_image(const TilingStage& stage, FaceId face);
NestedImage advance_image(const NestedImage& img, const StepResult& step);

// Disk sanity of a nested image within its stage: region connected, boundary
// chains concatenate into a simple closed curve lying on the region border.
bool nested_image_ok(const DecoratedStage& d, const NestedImage& img, std::string* why = nullptr);

}  // namespace polysub
