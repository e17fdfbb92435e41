#pragma once

#include "thoughtgraph/config.hpp"
#include "thoughtgraph/llm_gateway.hpp"
#include "thoughtgraph/ontology.hpp"
#include "thoughtgraph/prompts.hpp"
#include "thoughtgraph/thought_graph.hpp"

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace tgraph {

// Accepts numbered or bulleted lists, comma-separated lines, inline " - "
// bullets after a preamble, or a JSON array. Items are trimmed and stripped
// of quotes and markdown emphasis; empties are dropped. A single unmarked
// line is kept whole when expected == 1. Throws ParseError when nothing
// usable is found.
std::vector<std::string> parse_term_list(std::string_view raw, int expected);

// First of the four relation names mentioned in a reply.
std::optional<Relation> parse_relation(std::string_view raw);

// 1-based candidate numbers cited in a vote reply, in order, deduplicated,
// restricted to [1, pool]. Falls back to matching candidate texts when the
// reply has no numbers.
std::vector<int> parse_vote(std::string_view raw, const std::vector<std::string>& candidates);

struct Candidate {
    NodeId id;
    std::string term;
};

// Free-form remarks collected during a run (fallbacks, shortfalls).
using Notes = std::vector<std::string>;

// Drives the model through the layered expand / vote / label cycle. Holds no
// per-run state, so one engine may serve concurrent runs.
class ThoughtGraphEngine {
public:
    using Clock = std::function<std::string()>;

    ThoughtGraphEngine(ChatClient& chat, const Ontology& ontology, PromptSet prompts = PromptSet::defaults());

    // k_init general terms for the gene set.
    std::vector<std::string> initial_expand(const GeneSetRecord& gene_set, const RunConfig& cfg,
                                            Notes* notes = nullptr) const;

    // k_sub terms more specific than parent_term, none equal to it.
    std::vector<std::string> expand_node(const GeneSetRecord& gene_set, std::string_view parent_term,
                                         const RunConfig& cfg, Notes* notes = nullptr) const;

    // min(beam, pool) distinct ids, best first. Never fails: unusable replies
    // fall back to the lowest candidate indices.
    std::vector<NodeId> vote(const GeneSetRecord& gene_set, const std::vector<Candidate>& pool, int beam,
                             const RunConfig& cfg, Notes* notes = nullptr) const;

    std::pair<Relation, EdgeSource> label_edge(std::string_view parent_term, std::string_view child_term,
                                               const RunConfig& cfg, Notes* notes = nullptr) const;

    NodeId choose_final(const GeneSetRecord& gene_set, const std::vector<Candidate>& last_layer, const RunConfig& cfg,
                        Notes* notes = nullptr) const;

    // Full breadth-first run. Nothing is returned unless the graph is complete.
    ThoughtGraph run(const GeneSetRecord& gene_set, const RunConfig& cfg, const Clock& clock = {}) const;

    const PromptSet& prompts() const { return prompts_; }

private:
    ChatClient& chat_;
    const Ontology& ontology_;
    PromptSet prompts_;
};

ChatRequest make_chat_request(std::string_view tag, const RenderedPrompt& prompt, const RunConfig& cfg);

// Shared prompt fragments.
std::string format_genes(const std::vector<std::string>& genes);
std::string format_candidates(const std::vector<std::string>& terms);

// Generation loop shared with the baselines: render, ask, parse, deduplicate
// against exclude (normalized), top up a shortfall once.
std::vector<std::string> generate_distinct_terms(ChatClient& chat, std::string_view tag, const PromptTemplate& tpl,
                                                 Bindings bindings, int expected, std::vector<std::string> exclude,
                                                 const RunConfig& cfg, Notes* notes);

} // namespace tgraph
