#include "polysub/io.hpp"

#include <fstream>
#include <set>
#include <sstream>

namespace polysub {

const char* status_name(EdgeStatus s) {
    switch (s) {
        case EdgeStatus::Unburdened: return "unburdened";
        case EdgeStatus::Burdened: return "burdened";
        case EdgeStatus::Loaded: return "loaded";
    }
    return "?";
}

Json stage_to_json(const GluingSpec& spec, const TilingStage& stage) {
    Json j;
    j["schema_version"] = kSchemaVersion;
    j["stage"] = stage.stage;
    j["faces"] = Json::array();
    for (const StageFace& f : stage.faces) {
        Json jf;
        jf["id"] = f.id;
        jf["vertices"] = f.vertices;
        jf["instance"] = f.instance;
        jf["template_face"] = f.template_face;
        jf["edges"] = f.edges;
        j["faces"].push_back(std::move(jf));
    }
    j["edges"] = Json::array();
    for (const StageEdge& e : stage.edges) {
        Json je;
        je["id"] = e.id;
        je["v1"] = e.v1;
        je["v2"] = e.v2;
        je["class"] = e.cls;
        je["count"] = e.count;
        je["status"] = status_name(stage.status(spec, e));
        j["edges"].push_back(std::move(je));
    }
    j["instances"] = Json::array();
    for (const StageInstance& in : stage.instances) {
        Json ji;
        ji["id"] = in.id;
        ji["template"] = spec.templates[in.tmpl].name;
        ji["reflected"] = in.reflected;
        j["instances"].push_back(std::move(ji));
    }
    j["next"] = {{"vertex", stage.next_vertex},
                 {"edge", stage.next_edge},
                 {"face", stage.next_face},
                 {"instance", stage.next_instance}};
    return j;
}

TilingStage stage_from_json(const GluingSpec& spec, const Json& j) {
    try {
        TilingStage s;
        s.stage = j.at("stage").get<int>();
        for (const Json& jf : j.at("faces")) {
            StageFace f;
            f.id = jf.at("id").get<FaceId>();
            f.vertices = jf.at("vertices").get<std::vector<VertexId>>();
            f.edges = jf.at("edges").get<std::vector<EdgeId>>();
            f.instance = jf.at("instance").get<Index>();
            f.template_face = jf.at("template_face").get<Index>();
            s.faces.push_back(std::move(f));
        }
        for (const Json& je : j.at("edges")) {
            StageEdge e;
            e.id = je.at("id").get<EdgeId>();
            e.v1 = je.at("v1").get<VertexId>();
            e.v2 = je.at("v2").get<VertexId>();
            e.cls = je.at("class").get<Index>();
            e.count = je.at("count").get<int>();
            s.edges.push_back(e);
        }
        for (const Json& ji : j.at("instances")) {
            StageInstance in;
            in.id = ji.at("id").get<Index>();
            in.tmpl = spec.template_index(ji.at("template").get<std::string>());
            if (in.tmpl == kNone)
                fail("IoError", "unknown template '" + ji.at("template").get<std::string>() + "'");
            in.reflected = ji.at("reflected").get<bool>();
            s.instances.push_back(in);
        }
        const Json& n = j.at("next");
        s.next_vertex = n.at("vertex").get<VertexId>();
        s.next_edge = n.at("edge").get<EdgeId>();
        s.next_face = n.at("face").get<FaceId>();
        s.next_instance = n.at("instance").get<Index>();
        return s;
    } catch (const Json::exception& e) {
        fail("IoError", std::string("malformed stage file: ") + e.what());
    }
}

Json hypothesis_to_json(const HypothesisReport& rep) {
    Json j;
    j["schema_version"] = kSchemaVersion;
    switch (rep.theorem) {
        case Theorem::T31: j["hypotheses"] = "t31"; break;
        case Theorem::T41: j["hypotheses"] = "t41"; break;
        case Theorem::T42: j["hypotheses"] = "t42"; break;
    }
    j["pass"] = rep.pass;
    j["items"] = Json::array();
    for (const HypothesisItem& it : rep.items)
        j["items"].push_back({{"name", it.name}, {"pass", it.pass}, {"detail", it.detail}});
    return j;
}

Json stage_report_to_json(const StageReport& rep) {
    Json j;
    j["schema_version"] = kSchemaVersion;
    j["pass"] = rep.pass;
    j["checks"] = Json::array();
    for (const StageCheck& c : rep.checks)
        j["checks"].push_back({{"name", c.name}, {"pass", c.pass}, {"witness", c.witness}});
    return j;
}

Json stage_stats_to_json(const GluingSpec& spec, const TilingStage& stage) {
    Json j;
    j["schema_version"] = kSchemaVersion;
    j["stage"] = stage.stage;
    j["faces"] = stage.faces.size();
    j["edges"] = stage.edges.size();
    std::set<VertexId> verts;
    for (const StageEdge& e : stage.edges) {
        verts.insert(e.v1);
        verts.insert(e.v2);
    }
    j["vertices"] = verts.size();
    int u = 0, b = 0, l = 0;
    for (const StageEdge& e : stage.edges) {
        EdgeStatus st = stage.status(spec, e);
        (st == EdgeStatus::Unburdened ? u : st == EdgeStatus::Burdened ? b : l)++;
    }
    j["unburdened"] = u;
    j["burdened"] = b;
    j["loaded"] = l;
    return j;
}

std::string dump_json(const Json& j) { return j.dump(2) + "\n"; }

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("IoError", "cannot read '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) fail("IoError", "cannot write '" + path + "'");
    out << content;
    if (!out) fail("IoError", "write failed for '" + path + "'");
}

}  // namespace polysub
