#include "thoughtgraph/baselines.hpp"

#include "thoughtgraph/error.hpp"
#include "thoughtgraph/text.hpp"

#include <algorithm>
#include <fstream>
#include <set>

namespace tgraph {

namespace {

struct KindInfo {
    BaselineKind kind;
    std::string_view name;
    std::string_view label;
};

constexpr KindInfo kKinds[] = {
    {BaselineKind::IoZeroShot, "io-zero-shot", "IO zero-shot"},
    {BaselineKind::IoZeroShot9, "io-zero-shot-9", "IO zero-shot-9 (b)"},
    {BaselineKind::FewShot, "few-shot", "IO few-shot"},
    {BaselineKind::CoT, "cot", "CoT"},
};

std::vector<std::string> split_genes(std::string_view s) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == ',' || c == ' ' || c == '\t') {
            if (!cur.empty()) out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

} // namespace

std::string_view baseline_name(BaselineKind kind) {
    for (const auto& k : kKinds)
        if (k.kind == kind) return k.name;
    return "";
}

std::string_view baseline_label(BaselineKind kind) {
    for (const auto& k : kKinds)
        if (k.kind == kind) return k.label;
    return "";
}

std::optional<BaselineKind> baseline_from_name(std::string_view name) {
    for (const auto& k : kKinds)
        if (k.name == name) return k.kind;
    return std::nullopt;
}

std::vector<Exemplar> load_exemplars(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string line;
    std::size_t line_no = 0;
    bool with_id = false;
    bool header_seen = false;
    std::vector<Exemplar> out;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (text::trim(line).empty()) continue;
        auto cols = text::split(line, '\t');
        if (!header_seen) {
            header_seen = true;
            auto first = text::to_lower(text::trim(cols.front()));
            if (first == "id" && cols.size() == 3) {
                with_id = true;
                continue;
            }
            if (first == "genes" && cols.size() == 2) continue;
            throw ParseError("exemplar file needs a 'genes<TAB>answer' or 'id<TAB>genes<TAB>answer' header", line_no);
        }
        if (cols.size() != (with_id ? 3u : 2u)) throw ParseError("wrong number of exemplar columns", line_no);
        Exemplar e;
        if (with_id) e.id = text::trim(cols[0]);
        e.genes = split_genes(cols[with_id ? 1 : 0]);
        e.answer = text::trim(cols[with_id ? 2 : 1]);
        if (e.genes.empty() || e.answer.empty()) throw ParseError("exemplar row without genes or answer", line_no);
        out.push_back(std::move(e));
    }
    return out;
}

void check_exemplars(const std::vector<Exemplar>& exemplars, const GeneSetRecord& gene_set) {
    if (exemplars.size() != kFewShotExemplars)
        throw PreconditionError("few-shot needs exactly " + std::to_string(kFewShotExemplars) + " exemplars, got " +
                                std::to_string(exemplars.size()));
    std::set<std::string> target(gene_set.genes.begin(), gene_set.genes.end());
    for (const auto& e : exemplars) {
        if (e.id && *e.id == gene_set.id)
            throw PreconditionError("exemplar '" + *e.id + "' is the gene set under evaluation");
        if (std::set<std::string>(e.genes.begin(), e.genes.end()) == target)
            throw PreconditionError("an exemplar has the same genes as gene set '" + gene_set.id + "'");
    }
}

std::vector<std::vector<std::string>> top_pathways(const ThoughtGraph& graph) {
    auto final_id = graph.final_answer();
    if (!final_id) throw PreconditionError("top pathways need a completed graph");
    std::vector<std::vector<std::string>> out{path_terms(graph, *final_id)};

    const auto final_parent = graph.node(*final_id).parent;
    std::optional<NodeId> second;
    auto rank_of_parent = [&](NodeId id) {
        auto p = graph.node(id).parent;
        return p ? graph.node(*p).vote_rank.value_or(1 << 20) : 0;
    };
    // Other last-layer nodes: different parent first, then parent vote rank,
    // then insertion order.
    std::vector<NodeId> rest;
    for (auto id : graph.layer(graph.depth()))
        if (id != *final_id) rest.push_back(id);
    std::stable_sort(rest.begin(), rest.end(), [&](NodeId a, NodeId b) {
        bool a_same = graph.node(a).parent == final_parent;
        bool b_same = graph.node(b).parent == final_parent;
        if (a_same != b_same) return !a_same;
        return rank_of_parent(a) < rank_of_parent(b);
    });
    if (!rest.empty()) second = rest.front();
    if (second) out.push_back(path_terms(graph, *second));
    return out;
}

std::string format_pathways(const std::vector<std::vector<std::string>>& pathways) {
    std::string out;
    for (std::size_t i = 0; i < pathways.size(); ++i) {
        if (i) out += '\n';
        out += "Pathway " + std::to_string(i + 1) + ":";
        for (std::size_t j = 0; j < pathways[i].size(); ++j)
            out += "\n  Step " + std::to_string(j + 1) + ": " + pathways[i][j];
    }
    return out;
}

std::string extract_single_term(std::string_view reply) {
    std::string answer_line;
    for (const auto& line : text::split(reply, '\n')) {
        auto t = text::trim(line);
        auto plain = t;
        std::erase(plain, '*');
        if (text::starts_with_ci(text::trim(plain), "answer:")) answer_line = text::trim(text::trim(plain).substr(7));
    }
    if (!answer_line.empty()) return parse_term_list(answer_line, 1).front();
    return parse_term_list(reply, 1).front();
}

BaselineRunner::BaselineRunner(ChatClient& chat, PromptSet prompts) : chat_(chat), prompts_(std::move(prompts)) {}

std::string BaselineRunner::single_term(std::string_view tag, const RenderedPrompt& prompt, const RunConfig& cfg,
                                        Notes* notes) const {
    auto req = make_chat_request(tag, prompt, cfg);
    std::string reply;
    for (int attempt = 0;; ++attempt) {
        reply = chat(chat_, req).text;
        try {
            return extract_single_term(reply);
        } catch (const ParseError&) {
            if (attempt >= cfg.vote_retries) break;
            if (notes) notes->push_back(std::string(tag) + ": empty reply, asking again");
            req.messages.push_back({Role::Assistant, reply.empty() ? "(no answer)" : reply});
            req.messages.push_back({Role::User, "Answer with one biological process name and nothing else."});
            req.request_tag = std::string(tag) + "_reask";
        }
    }
    throw GenerationError(std::string(tag) + ": no term in reply", reply);
}

std::string BaselineRunner::io_zero_shot(const GeneSetRecord& gene_set, const RunConfig& cfg, Notes* notes) const {
    validate(gene_set);
    return single_term("io_zero_shot",
                       render(prompts_.get(prompt_names::kIoZeroShot), {{"genes", format_genes(gene_set.genes)}}), cfg,
                       notes);
}

std::vector<std::string> BaselineRunner::io_zero_shot_9(const GeneSetRecord& gene_set, const RunConfig& cfg,
                                                        Notes* notes) const {
    validate(gene_set);
    return generate_distinct_terms(chat_, "io_zero_shot_9", prompts_.get(prompt_names::kIoZeroShot9),
                                   {{"genes", format_genes(gene_set.genes)}}, kZeroShotNineCount, {}, cfg, notes);
}

std::string BaselineRunner::few_shot(const GeneSetRecord& gene_set, const std::vector<Exemplar>& exemplars,
                                     const RunConfig& cfg, Notes* notes) const {
    validate(gene_set);
    check_exemplars(exemplars, gene_set);
    std::string shots;
    for (std::size_t i = 0; i < exemplars.size(); ++i) {
        if (i) shots += "\n\n";
        shots += "Genes: " + format_genes(exemplars[i].genes) + "\nProcess: " + exemplars[i].answer;
    }
    return single_term("few_shot",
                       render(prompts_.get(prompt_names::kFewShot),
                              {{"genes", format_genes(gene_set.genes)}, {"exemplars", shots}}),
                       cfg, notes);
}

std::string BaselineRunner::cot_prompt(const GeneSetRecord& gene_set, const ThoughtGraph& graph) const {
    return render(prompts_.get(prompt_names::kCot),
                  {{"genes", format_genes(gene_set.genes)}, {"pathways", format_pathways(top_pathways(graph))}})
        .user;
}

std::string BaselineRunner::cot(const GeneSetRecord& gene_set, const ThoughtGraph& graph, const RunConfig& cfg,
                                Notes* notes) const {
    validate(gene_set);
    auto prompt = render(prompts_.get(prompt_names::kCot),
                         {{"genes", format_genes(gene_set.genes)}, {"pathways", format_pathways(top_pathways(graph))}});
    return single_term("cot", prompt, cfg, notes);
}

} // namespace tgraph
