#include "thoughtgraph/thought_graph.hpp"

#include "thoughtgraph/error.hpp"
#include "thoughtgraph/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

namespace tgraph {

using nlohmann::json;

void validate(const GeneSetRecord& record) {
    if (record.genes.empty()) throw ValidationError("gene set '" + record.id + "' has no genes");
    std::set<std::string> seen;
    for (const auto& g : record.genes) {
        if (text::trim(g).empty()) throw ValidationError("gene set '" + record.id + "' contains an empty gene symbol");
        if (!seen.insert(g).second)
            throw ValidationError("gene set '" + record.id + "' lists gene '" + g + "' more than once");
    }
}

std::string_view edge_source_name(EdgeSource s) {
    return s == EdgeSource::OntologyLookup ? "ontology_lookup" : "model_labeled";
}

ThoughtGraph::ThoughtGraph(GeneSetRecord gene_set, RunConfig config)
    : gene_set_(std::move(gene_set)), config_(std::move(config)) {
    provenance_.model = config_.model;
    provenance_.seed = config_.seed;
}

bool ThoughtGraph::contains(NodeId id) const {
    return std::any_of(nodes_.begin(), nodes_.end(), [&](const ThoughtNode& n) { return n.id == id; });
}

const ThoughtNode& ThoughtGraph::node(NodeId id) const {
    auto it = std::find_if(nodes_.begin(), nodes_.end(), [&](const ThoughtNode& n) { return n.id == id; });
    if (it == nodes_.end()) throw StructuralError("no node with id " + std::to_string(id.value));
    return *it;
}

ThoughtNode& ThoughtGraph::mutable_node(NodeId id) { return const_cast<ThoughtNode&>(std::as_const(*this).node(id)); }

int ThoughtGraph::depth() const {
    int d = 0;
    for (const auto& n : nodes_) d = std::max(d, n.layer);
    return d;
}

std::vector<NodeId> ThoughtGraph::layer(int layer) const {
    std::vector<NodeId> out;
    for (const auto& n : nodes_)
        if (n.layer == layer) out.push_back(n.id);
    return out;
}

std::vector<NodeId> ThoughtGraph::children(NodeId parent) const {
    std::vector<NodeId> out;
    for (const auto& n : nodes_)
        if (n.parent == parent) out.push_back(n.id);
    return out;
}

const ThoughtEdge* ThoughtGraph::edge_to(NodeId child) const {
    auto it = std::find_if(edges_.begin(), edges_.end(), [&](const ThoughtEdge& e) { return e.child_id == child; });
    return it == edges_.end() ? nullptr : &*it;
}

NodeId ThoughtGraph::add_node(std::string_view term, int layer, std::optional<NodeId> parent) {
    auto trimmed = text::trim(term);
    if (trimmed.empty()) throw ValidationError("node term is empty");
    if (layer < 1) throw StructuralError("layer must be at least 1");
    if ((layer == 1) != !parent.has_value())
        throw StructuralError("a node has a parent exactly when it is below layer 1");
    if (parent) {
        const auto& p = node(*parent);
        if (p.layer != layer - 1)
            throw StructuralError("parent " + std::to_string(parent->value) + " is on layer " + std::to_string(p.layer) +
                                  ", expected " + std::to_string(layer - 1));
        if (!p.voted) throw StructuralError("parent " + std::to_string(parent->value) + " was not voted");
    }
    ThoughtNode n;
    n.id = NodeId{next_id_++};
    n.layer = layer;
    n.term = std::move(trimmed);
    n.parent = parent;
    nodes_.push_back(std::move(n));
    return nodes_.back().id;
}

void ThoughtGraph::mark_voted(std::span<const NodeId> ids) {
    if (ids.empty()) return;
    const int layer = node(ids.front()).layer;
    for (auto id : ids)
        if (node(id).layer != layer) throw StructuralError("voted ids span more than one layer");

    for (auto& n : nodes_) {
        if (n.layer != layer) continue;
        auto pos = std::find(ids.begin(), ids.end(), n.id);
        if (pos == ids.end()) {
            if (n.voted && !children(n.id).empty())
                throw StructuralError("cannot unvote node " + std::to_string(n.id.value) + " which has children");
            n.voted = false;
            n.vote_rank.reset();
            if (n.is_final_answer) {
                n.is_final_answer = false;
                final_answer_.reset();
            }
        } else if (!n.voted || !n.vote_rank) {
            n.voted = true;
            n.vote_rank = static_cast<int>(std::distance(ids.begin(), pos)) + 1;
        }
    }
}

void ThoughtGraph::add_edge(NodeId parent, NodeId child, Relation relation, EdgeSource source) {
    const auto& c = node(child);
    if (c.parent != parent)
        throw StructuralError("edge " + std::to_string(parent.value) + " -> " + std::to_string(child.value) +
                              " does not match the child's parent");
    if (edge_to(child)) throw StructuralError("node " + std::to_string(child.value) + " already has a parent edge");
    edges_.push_back({parent, child, relation, source});
}

void ThoughtGraph::set_final_answer(NodeId id) {
    auto& n = mutable_node(id);
    if (n.layer != depth()) throw StructuralError("final answer must come from the deepest layer");
    if (final_answer_ && *final_answer_ != id) mutable_node(*final_answer_).is_final_answer = false;
    n.voted = true;
    if (!n.vote_rank) n.vote_rank = 1;
    n.is_final_answer = true;
    final_answer_ = id;
}

bool ThoughtGraph::operator==(const ThoughtGraph& other) const {
    auto strip = [](Provenance p) {
        p.generated_at.reset();
        return p;
    };
    return gene_set_ == other.gene_set_ && config_ == other.config_ && nodes_ == other.nodes_ &&
           edges_ == other.edges_ && final_answer_ == other.final_answer_ &&
           strip(provenance_) == strip(other.provenance_);
}

std::vector<ThoughtNode> voted_nodes(const ThoughtGraph& graph) {
    std::vector<ThoughtNode> out;
    for (const auto& n : graph.nodes())
        if (n.voted || n.is_final_answer) out.push_back(n);
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.layer < b.layer; });
    return out;
}

void validate(const ThoughtGraph& graph) {
    auto fail = [](const std::string& invariant) { throw ValidationError("graph invariant violated: " + invariant); };
    validate(graph.gene_set());

    std::map<NodeId, const ThoughtNode*> by_id;
    for (const auto& n : graph.nodes()) {
        if (!by_id.emplace(n.id, &n).second) fail("node ids are unique");
        if (text::trim(n.term).empty()) fail("node terms are nonempty");
        if (n.layer < 1) fail("layers start at 1");
    }
    for (const auto& n : graph.nodes()) {
        if ((n.layer == 1) != !n.parent) fail("a node has a parent exactly when it is below layer 1");
        if (!n.parent) continue;
        auto it = by_id.find(*n.parent);
        if (it == by_id.end()) fail("parents refer to existing nodes");
        if (it->second->layer != n.layer - 1) fail("a parent sits exactly one layer above its child");
        if (!it->second->voted) fail("only voted nodes have children");
        if (n.is_final_answer != (graph.final_answer() == n.id)) fail("the final-answer flag matches final_answer");
    }
    std::set<NodeId> has_edge;
    for (const auto& e : graph.edges()) {
        auto c = by_id.find(e.child_id);
        if (c == by_id.end() || !by_id.count(e.parent_id)) fail("edges connect existing nodes");
        if (c->second->parent != e.parent_id) fail("edges follow parent links");
        if (!has_edge.insert(e.child_id).second) fail("each node has at most one parent edge");
    }
    if (auto final_id = graph.final_answer()) {
        auto it = by_id.find(*final_id);
        if (it == by_id.end()) fail("final_answer refers to an existing node");
        if (it->second->layer != graph.depth()) fail("the final answer sits in the deepest layer");
        if (!it->second->voted || !it->second->is_final_answer) fail("the final answer is voted and flagged");
        for (const auto& n : graph.nodes())
            if (n.parent && !has_edge.count(n.id)) fail("every non-root node of a completed graph has a labeled edge");
    }
    for (const auto& n : graph.nodes())
        if (n.is_final_answer && graph.final_answer() != n.id) fail("only the final answer carries the final flag");
}

namespace {

json opt(const std::optional<std::string>& v) { return v ? json(*v) : json(nullptr); }

std::optional<std::string> opt_string(const json& j, const char* key) {
    if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
    return j.at(key).get<std::string>();
}

json gene_set_json(const GeneSetRecord& g) {
    return {{"id", g.id},
            {"genes", g.genes},
            {"ground_truth_name", opt(g.ground_truth_name)},
            {"ground_truth_go_id", opt(g.ground_truth_go_id)},
            {"description", opt(g.description)}};
}

EdgeSource edge_source_from(const std::string& s) {
    if (s == "ontology_lookup") return EdgeSource::OntologyLookup;
    if (s == "model_labeled") return EdgeSource::ModelLabeled;
    throw ValidationError("unknown edge source '" + s + "'");
}

} // namespace

std::string graph_to_json(const ThoughtGraph& graph, bool include_timestamp) {
    json nodes = json::array();
    for (const auto& n : graph.nodes()) {
        nodes.push_back({{"id", n.id.value},
                         {"layer", n.layer},
                         {"term", n.term},
                         {"parent", n.parent ? json(n.parent->value) : json(nullptr)},
                         {"voted", n.voted},
                         {"vote_rank", n.vote_rank ? json(*n.vote_rank) : json(nullptr)},
                         {"final", n.is_final_answer}});
    }
    json edges = json::array();
    for (const auto& e : graph.edges()) {
        edges.push_back({{"parent", e.parent_id.value},
                         {"child", e.child_id.value},
                         {"relation", relation_name(e.relation)},
                         {"source", edge_source_name(e.source)}});
    }
    const auto& p = graph.provenance();
    json prov = {{"model", p.model},
                 {"seed", p.seed},
                 {"provider", p.provider},
                 {"chat_calls", p.chat_calls},
                 {"exchange_digest", p.exchange_digest},
                 {"notes", p.notes},
                 {"duplicate_terms", p.duplicate_terms}};
    if (include_timestamp && p.generated_at) prov["generated_at"] = *p.generated_at;

    json doc = {{"schema_version", 1},
                {"gene_set", gene_set_json(graph.gene_set())},
                {"config", to_json(graph.config())},
                {"nodes", nodes},
                {"edges", edges},
                {"final_answer", graph.final_answer() ? json(graph.final_answer()->value) : json(nullptr)},
                {"provenance", prov}};
    return doc.dump(2) + "\n";
}

ThoughtGraph graph_from_json(std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("graph is not valid JSON: ") + e.what());
    }
    ThoughtGraph g;
    try {
        if (doc.at("schema_version").get<int>() != 1) throw ValidationError("unsupported graph schema_version");
        const auto& gs = doc.at("gene_set");
        g.gene_set_.id = gs.at("id").get<std::string>();
        g.gene_set_.genes = gs.at("genes").get<std::vector<std::string>>();
        g.gene_set_.ground_truth_name = opt_string(gs, "ground_truth_name");
        g.gene_set_.ground_truth_go_id = opt_string(gs, "ground_truth_go_id");
        g.gene_set_.description = opt_string(gs, "description");
        g.config_ = config_from_json(doc.at("config"));

        for (const auto& j : doc.at("nodes")) {
            ThoughtNode n;
            n.id = NodeId{j.at("id").get<std::uint32_t>()};
            n.layer = j.at("layer").get<int>();
            n.term = j.at("term").get<std::string>();
            if (!j.at("parent").is_null()) n.parent = NodeId{j.at("parent").get<std::uint32_t>()};
            n.voted = j.at("voted").get<bool>();
            if (j.contains("vote_rank") && !j.at("vote_rank").is_null()) n.vote_rank = j.at("vote_rank").get<int>();
            n.is_final_answer = j.at("final").get<bool>();
            g.next_id_ = std::max(g.next_id_, n.id.value + 1);
            g.nodes_.push_back(std::move(n));
        }
        for (const auto& j : doc.at("edges")) {
            auto rel = relation_from_name(j.at("relation").get<std::string>());
            if (!rel) throw ValidationError("graph invariant violated: edge relation is one of the four GO relations");
            g.edges_.push_back({NodeId{j.at("parent").get<std::uint32_t>()}, NodeId{j.at("child").get<std::uint32_t>()},
                                *rel, edge_source_from(j.at("source").get<std::string>())});
        }
        if (!doc.at("final_answer").is_null()) g.final_answer_ = NodeId{doc.at("final_answer").get<std::uint32_t>()};

        const auto& p = doc.at("provenance");
        g.provenance_.model = p.at("model").get<std::string>();
        g.provenance_.seed = p.at("seed").get<std::uint64_t>();
        g.provenance_.provider = p.at("provider").get<std::string>();
        g.provenance_.chat_calls = p.at("chat_calls").get<std::uint64_t>();
        g.provenance_.exchange_digest = p.at("exchange_digest").get<std::string>();
        g.provenance_.notes = p.at("notes").get<std::vector<std::string>>();
        g.provenance_.duplicate_terms = p.at("duplicate_terms").get<std::vector<std::string>>();
        g.provenance_.generated_at = opt_string(p, "generated_at");
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed graph JSON: ") + e.what());
    } catch (const ConfigError& e) {
        throw ValidationError(std::string("malformed graph config: ") + e.what());
    }
    validate(g);
    return g;
}

namespace {

std::string dot_quote(std::string_view s) {
    std::string out = "\"";
    for (char c : s) {
        if (c == '"' || c == '\\') out.push_back('\\');
        if (c == '\n') {
            out += "\\n";
            continue;
        }
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

} // namespace

std::string graph_to_dot(const ThoughtGraph& graph) {
    std::ostringstream out;
    out << "digraph thought_graph {\n";
    if (!graph.nodes().empty()) {
        out << "  graph [rankdir=TB];\n";
        out << "  node [shape=box, style=rounded];\n";
    }
    for (const auto& n : graph.nodes()) {
        out << "  n" << n.id.value << " [label=" << dot_quote(n.term);
        if (n.voted) {
            const bool best = n.vote_rank.value_or(1) == 1;
            out << ", style=\"rounded,filled\", fillcolor=" << (best ? "\"#2e7d32\", fontcolor=white" : "\"#a5d6a7\"");
        }
        if (n.is_final_answer) out << ", peripheries=2";
        out << "];\n";
    }
    for (const auto& e : graph.edges())
        out << "  n" << e.parent_id.value << " -> n" << e.child_id.value << " [label=" << dot_quote(relation_name(e.relation))
            << (e.source == EdgeSource::ModelLabeled ? ", style=dashed" : "") << "];\n";
    out << "}\n";
    return out.str();
}

std::vector<std::string> path_terms(const ThoughtGraph& graph, NodeId node) {
    std::vector<std::string> chain;
    std::optional<NodeId> cur = node;
    while (cur) {
        const auto& n = graph.node(*cur);
        chain.push_back(n.term);
        cur = n.parent;
    }
    std::reverse(chain.begin(), chain.end());
    return chain;
}

} // namespace tgraph
