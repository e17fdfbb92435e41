#pragma once

#include "thoughtgraph/config.hpp"
#include "thoughtgraph/ontology.hpp"

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tgraph {

// One gene set to annotate.
struct GeneSetRecord {
    std::string id;
    std::vector<std::string> genes;
    std::optional<std::string> ground_truth_name;
    std::optional<std::string> ground_truth_go_id;
    std::optional<std::string> description;

    bool operator==(const GeneSetRecord&) const = default;
};

// Throws ValidationError on an empty gene list, empty symbols or duplicates.
void validate(const GeneSetRecord& record);

struct NodeId {
    std::uint32_t value = 0;

    auto operator<=>(const NodeId&) const = default;
};

struct ThoughtNode {
    NodeId id;
    int layer = 1;
    std::string term;
    std::optional<NodeId> parent;
    bool voted = false;
    bool is_final_answer = false;
    // 1 = best pick of the vote that selected this node.
    std::optional<int> vote_rank;

    bool operator==(const ThoughtNode&) const = default;
};

enum class EdgeSource { OntologyLookup, ModelLabeled };

std::string_view edge_source_name(EdgeSource s);

struct ThoughtEdge {
    NodeId parent_id;
    NodeId child_id;
    Relation relation = Relation::IsA;
    EdgeSource source = EdgeSource::ModelLabeled;

    bool operator==(const ThoughtEdge&) const = default;
};

struct Provenance {
    std::string model;
    std::uint64_t seed = 0;
    std::string provider;
    std::uint64_t chat_calls = 0;
    // Digest over every (request digest, response) pair of the run.
    std::string exchange_digest;
    std::vector<std::string> notes;
    // Normalized term texts that occur on more than one node.
    std::vector<std::string> duplicate_terms;
    // Not part of the canonical form.
    std::optional<std::string> generated_at;

    bool operator==(const Provenance&) const = default;
};

class ThoughtGraph {
public:
    ThoughtGraph() = default;
    explicit ThoughtGraph(GeneSetRecord gene_set, RunConfig config = {});

    const GeneSetRecord& gene_set() const { return gene_set_; }
    const RunConfig& config() const { return config_; }
    const std::vector<ThoughtNode>& nodes() const { return nodes_; }
    const std::vector<ThoughtEdge>& edges() const { return edges_; }
    std::optional<NodeId> final_answer() const { return final_answer_; }
    Provenance& provenance() { return provenance_; }
    const Provenance& provenance() const { return provenance_; }

    const ThoughtNode& node(NodeId id) const;
    bool contains(NodeId id) const;
    int depth() const;
    std::vector<NodeId> layer(int layer) const;
    std::vector<NodeId> children(NodeId parent) const;
    const ThoughtEdge* edge_to(NodeId child) const;

    // Appends an unvoted node; ids are a per-graph counter starting at 1.
    NodeId add_node(std::string_view term, int layer, std::optional<NodeId> parent = std::nullopt);

    // Sets voted on exactly these nodes of their layer, ranked in list order.
    void mark_voted(std::span<const NodeId> ids);

    void add_edge(NodeId parent, NodeId child, Relation relation, EdgeSource source);

    // Marks the node voted and final; it must sit in the deepest layer.
    void set_final_answer(NodeId id);

    // Equality ignores provenance.generated_at.
    bool operator==(const ThoughtGraph& other) const;

private:
    ThoughtNode& mutable_node(NodeId id);

    GeneSetRecord gene_set_;
    RunConfig config_;
    std::vector<ThoughtNode> nodes_;
    std::vector<ThoughtEdge> edges_;
    std::optional<NodeId> final_answer_;
    Provenance provenance_;
    std::uint32_t next_id_ = 1;

    friend ThoughtGraph graph_from_json(std::string_view);
};

// Voted nodes plus the final answer, ordered by (layer, insertion order).
std::vector<ThoughtNode> voted_nodes(const ThoughtGraph& graph);

// Throws ValidationError naming the first violated invariant. A graph with a
// final answer must also have every edge labeled.
void validate(const ThoughtGraph& graph);

// Canonical JSON: sorted keys, no timestamp unless asked for. Equal graphs
// give byte-equal text.
std::string graph_to_json(const ThoughtGraph& graph, bool include_timestamp = false);
ThoughtGraph graph_from_json(std::string_view json_text);

std::string graph_to_dot(const ThoughtGraph& graph);

// Root-to-node chain of terms.
std::vector<std::string> path_terms(const ThoughtGraph& graph, NodeId node);

} // namespace tgraph
