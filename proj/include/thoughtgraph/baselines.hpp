#pragma once

#include "thoughtgraph/config.hpp"
#include "thoughtgraph/engine.hpp"
#include "thoughtgraph/llm_gateway.hpp"
#include "thoughtgraph/prompts.hpp"
#include "thoughtgraph/thought_graph.hpp"

#include <optional>
#include <string>
#include <vector>

namespace tgraph {

enum class BaselineKind { IoZeroShot, IoZeroShot9, FewShot, CoT };

// "io-zero-shot", "io-zero-shot-9", "few-shot", "cot".
std::string_view baseline_name(BaselineKind kind);
std::optional<BaselineKind> baseline_from_name(std::string_view name);
// Row label used in reports, e.g. "IO zero-shot-9 (b)".
std::string_view baseline_label(BaselineKind kind);

inline constexpr int kZeroShotNineCount = 9;
inline constexpr std::size_t kFewShotExemplars = 5;

// A solved question shown to the model in the few-shot prompt.
struct Exemplar {
    std::optional<std::string> id;
    std::vector<std::string> genes;
    std::string answer;
};

// TSV with a header: "genes<TAB>answer" or "id<TAB>genes<TAB>answer". Gene
// symbols are separated by spaces or commas.
std::vector<Exemplar> load_exemplars(const std::string& path);

// Throws PreconditionError unless there are exactly five exemplars and none
// shares an id or a gene set with the record under evaluation.
void check_exemplars(const std::vector<Exemplar>& exemplars, const GeneSetRecord& gene_set);

// The two chains used by the CoT baseline. The first ends at the final
// answer; the second at the best-ranked other last-layer node, preferring
// one under a different parent. Each chain runs root to last layer.
std::vector<std::vector<std::string>> top_pathways(const ThoughtGraph& graph);
std::string format_pathways(const std::vector<std::vector<std::string>>& pathways);

// Pulls one term out of a free-text reply ("Answer: X" line, else the first
// list item). Throws ParseError when there is nothing.
std::string extract_single_term(std::string_view reply);

class BaselineRunner {
public:
    explicit BaselineRunner(ChatClient& chat, PromptSet prompts = PromptSet::defaults());

    std::string io_zero_shot(const GeneSetRecord& gene_set, const RunConfig& cfg, Notes* notes = nullptr) const;
    std::vector<std::string> io_zero_shot_9(const GeneSetRecord& gene_set, const RunConfig& cfg,
                                            Notes* notes = nullptr) const;
    std::string few_shot(const GeneSetRecord& gene_set, const std::vector<Exemplar>& exemplars, const RunConfig& cfg,
                         Notes* notes = nullptr) const;
    std::string cot(const GeneSetRecord& gene_set, const ThoughtGraph& graph, const RunConfig& cfg,
                    Notes* notes = nullptr) const;

    // The user message cot() would send.
    std::string cot_prompt(const GeneSetRecord& gene_set, const ThoughtGraph& graph) const;

private:
    std::string single_term(std::string_view tag, const RenderedPrompt& prompt, const RunConfig& cfg,
                            Notes* notes) const;

    ChatClient& chat_;
    PromptSet prompts_;
};

} // namespace tgraph
