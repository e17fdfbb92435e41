#include "thoughtgraph/engine.hpp"

#include "thoughtgraph/error.hpp"
#include "thoughtgraph/log.hpp"
#include "thoughtgraph/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <future>
#include <map>
#include <mutex>
#include <regex>
#include <set>

namespace tgraph {

// ---- reply parsing ---------------------------------------------------------

namespace {

std::string strip_item(std::string_view raw) {
    auto s = text::trim(raw);
    // **bold** span wins over any trailing explanation.
    if (auto b = s.find("**"); b != std::string::npos) {
        auto e = s.find("**", b + 2);
        if (e != std::string::npos && e > b + 2) s = s.substr(b + 2, e - b - 2);
    }
    for (std::string_view cut : {": ", " - ", " \xE2\x80\x93 ", " \xE2\x80\x94 "}) {
        if (auto pos = s.find(cut); pos != std::string::npos && pos > 0) s = s.substr(0, pos);
    }
    s = text::trim(s);
    auto strip_pair = [&](std::string_view open, std::string_view close) {
        if (s.size() >= open.size() + close.size() && s.compare(0, open.size(), open) == 0 &&
            s.compare(s.size() - close.size(), close.size(), close) == 0) {
            s = text::trim(std::string_view(s).substr(open.size(), s.size() - open.size() - close.size()));
            return true;
        }
        return false;
    };
    bool changed = true;
    while (changed && !s.empty()) {
        changed = strip_pair("\"", "\"") || strip_pair("'", "'") || strip_pair("`", "`") || strip_pair("*", "*") ||
                  strip_pair("_", "_") || strip_pair("\xE2\x80\x9C", "\xE2\x80\x9D");
        while (!s.empty() && (s.back() == '.' || s.back() == ',' || s.back() == ';')) {
            s.pop_back();
            changed = true;
        }
        s = text::trim(s);
    }
    return s;
}

std::vector<std::string> cleaned(const std::vector<std::string>& items) {
    std::vector<std::string> out;
    for (const auto& i : items) {
        auto s = strip_item(i);
        if (std::any_of(s.begin(), s.end(), [](unsigned char c) { return std::isalnum(c) || c >= 0x80; }))
            out.push_back(std::move(s));
    }
    return out;
}

std::optional<std::vector<std::string>> try_json_array(const std::string& t) {
    auto b = t.find('[');
    auto e = t.rfind(']');
    if (b == std::string::npos || e == std::string::npos || e < b) return std::nullopt;
    auto j = nlohmann::json::parse(t.substr(b, e - b + 1), nullptr, false);
    if (j.is_discarded() || !j.is_array()) return std::nullopt;
    std::vector<std::string> out;
    for (const auto& v : j) {
        if (!v.is_string()) return std::nullopt;
        out.push_back(v.get<std::string>());
    }
    return out;
}

} // namespace

std::vector<std::string> parse_term_list(std::string_view raw, int expected) {
    const auto t = text::trim(raw);
    auto fail = [&]() -> std::vector<std::string> { throw ParseError("no terms found in reply: " + t); };
    if (t.empty()) return fail();

    if (auto arr = try_json_array(t)) {
        auto items = cleaned(*arr);
        if (!items.empty()) return items;
    }

    std::vector<std::string> lines;
    for (auto& l : text::split(t, '\n')) {
        auto s = text::trim(l);
        if (!s.empty()) lines.push_back(std::move(s));
    }

    static const std::regex marker(R"(^(?:\(?\d+[.):]|[-*+]|\xE2\x80\xA2)\s*(.+)$)");
    std::vector<std::string> marked;
    for (const auto& l : lines) {
        std::smatch m;
        if (std::regex_match(l, m, marker)) marked.push_back(m[1].str());
    }
    if (!marked.empty()) {
        auto items = cleaned(marked);
        if (items.empty()) return fail();
        return items;
    }

    static const std::regex inline_bullet(R"((?:^|\s)[-*\xE2\x80\xA2]\s+)");
    std::vector<std::string> items;
    for (auto line : lines) {
        if (lines.size() > 1 && line.back() == ':') continue;
        if (auto colon = line.rfind(": "); colon != std::string::npos) line = text::trim(line.substr(colon + 2));
        else if (!line.empty() && line.back() == ':') continue;

        if (std::regex_search(line, inline_bullet)) {
            std::sregex_token_iterator it(line.begin(), line.end(), inline_bullet, -1), end;
            for (; it != end; ++it) items.push_back(it->str());
        } else if (expected == 1 && lines.size() == 1) {
            items.push_back(line);
        } else {
            for (auto& part : text::split(line, ',')) {
                for (auto& p : text::split(part, ';')) items.push_back(p);
            }
        }
    }
    items = cleaned(items);
    if (items.empty()) return fail();
    return items;
}

std::optional<Relation> parse_relation(std::string_view raw) {
    static const std::regex exact(R"(\b(is_a|part_of|has_part|regulates|positively_regulates|negatively_regulates)\b)");
    static const std::regex loose(R"(\b(is an?|part of|has part|regulates)\b)");
    const auto s = text::to_lower(raw);
    for (const auto* re : {&exact, &loose}) {
        std::smatch m;
        if (!std::regex_search(s, m, *re)) continue;
        auto word = m[1].str();
        if (word.starts_with("is")) return Relation::IsA;
        if (word.starts_with("part")) return Relation::PartOf;
        if (word.starts_with("has")) return Relation::HasPart;
        return Relation::Regulates;
    }
    return std::nullopt;
}

std::vector<int> parse_vote(std::string_view raw, const std::vector<std::string>& candidates) {
    const int pool = static_cast<int>(candidates.size());
    std::vector<int> picks;
    auto add = [&](int idx) {
        if (idx >= 1 && idx <= pool && std::find(picks.begin(), picks.end(), idx) == picks.end()) picks.push_back(idx);
    };
    static const std::regex number(R"(\d+)");
    std::string s(raw);
    bool any_number = false;
    for (std::sregex_iterator it(s.begin(), s.end(), number), end; it != end; ++it) {
        any_number = true;
        if (it->length() <= 6) add(std::stoi(it->str()));
    }
    if (any_number) return picks;

    // No numbers: locate candidate texts, longest first so a term that
    // contains another is not shadowed by it.
    auto haystack = text::normalize_key(raw);
    std::vector<int> order(candidates.size());
    for (int i = 0; i < pool; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return candidates[a].size() > candidates[b].size(); });
    std::vector<std::pair<std::size_t, std::size_t>> taken;
    std::vector<std::pair<std::size_t, int>> hits;
    for (int i : order) {
        auto needle = text::normalize_key(candidates[i]);
        if (needle.empty()) continue;
        for (auto pos = haystack.find(needle); pos != std::string::npos; pos = haystack.find(needle, pos + 1)) {
            auto end = pos + needle.size();
            auto word_char = [&](std::size_t at) { return std::isalnum(static_cast<unsigned char>(haystack[at])) != 0; };
            if ((pos > 0 && word_char(pos - 1)) || (end < haystack.size() && word_char(end))) continue;
            bool overlaps = std::any_of(taken.begin(), taken.end(),
                                        [&](const auto& r) { return pos < r.second && r.first < end; });
            if (!overlaps) {
                taken.emplace_back(pos, end);
                hits.emplace_back(pos, i + 1);
                break;
            }
        }
    }
    std::sort(hits.begin(), hits.end());
    for (const auto& [pos, idx] : hits) add(idx);
    return picks;
}

// ---- prompt plumbing --------------------------------------------------------

std::string format_genes(const std::vector<std::string>& genes) { return text::join(genes, ", "); }

std::string format_candidates(const std::vector<std::string>& terms) {
    std::string out;
    for (std::size_t i = 0; i < terms.size(); ++i) {
        if (i) out += '\n';
        out += std::to_string(i + 1) + ". " + terms[i];
    }
    return out;
}

ChatRequest make_chat_request(std::string_view tag, const RenderedPrompt& prompt, const RunConfig& cfg) {
    ChatRequest r;
    r.model = cfg.model;
    r.temperature = cfg.temperature;
    r.max_tokens = cfg.max_tokens;
    r.request_tag = std::string(tag);
    if (!prompt.system.empty()) r.messages.push_back({Role::System, prompt.system});
    r.messages.push_back({Role::User, prompt.user});
    return r;
}

namespace {

void note(Notes* notes, std::string message) {
    log::debug(message);
    if (notes) notes->push_back(std::move(message));
}

// Continues a conversation with the model's last reply and a follow-up.
void follow_up(ChatRequest& req, const std::string& reply, std::string message, std::string tag) {
    req.messages.push_back({Role::Assistant, reply});
    req.messages.push_back({Role::User, std::move(message)});
    req.request_tag = std::move(tag);
}

} // namespace

std::vector<std::string> generate_distinct_terms(ChatClient& client, std::string_view tag, const PromptTemplate& tpl,
                                                 Bindings bindings, int expected, std::vector<std::string> exclude,
                                                 const RunConfig& cfg, Notes* notes) {
    bindings["count"] = std::to_string(expected);
    auto req = make_chat_request(tag, render(tpl, bindings), cfg);

    std::vector<std::string> items;
    std::string reply;
    for (int attempt = 0;; ++attempt) {
        reply = chat(client, req).text;
        try {
            items = parse_term_list(reply, expected);
            break;
        } catch (const ParseError&) {
            if (attempt >= cfg.vote_retries)
                throw GenerationError(std::string(tag) + ": no usable term list after " + std::to_string(attempt + 1) +
                                          " attempts",
                                      reply);
            follow_up(req, reply,
                      "I could not read a list in that reply. Answer with a numbered list of exactly " +
                          std::to_string(expected) + " biological process names and nothing else.",
                      std::string(tag) + "_reask");
        }
    }

    std::set<std::string> seen;
    for (const auto& e : exclude) seen.insert(text::normalize_key(e));
    std::vector<std::string> accepted;
    auto accept = [&](const std::vector<std::string>& batch) {
        for (const auto& item : batch) {
            if (static_cast<int>(accepted.size()) >= expected) break;
            if (seen.insert(text::normalize_key(item)).second) accepted.push_back(item);
        }
    };
    accept(items);

    if (static_cast<int>(accepted.size()) < expected) {
        const int shortfall = expected - static_cast<int>(accepted.size());
        note(notes, std::string(tag) + ": reply gave " + std::to_string(accepted.size()) + " usable distinct terms of " +
                        std::to_string(expected) + "; asking for " + std::to_string(shortfall) + " more");
        std::vector<std::string> avoid = exclude;
        avoid.insert(avoid.end(), accepted.begin(), accepted.end());
        follow_up(req, reply,
                  "Some of those were repeats. Give " + std::to_string(shortfall) +
                      " more distinct biological process names, different from: " + text::join(avoid, "; ") +
                      ". Answer with a numbered list only.",
                  std::string(tag) + "_topup");
        auto topup = chat(client, req).text;
        try {
            accept(parse_term_list(topup, shortfall));
        } catch (const ParseError&) {
        }
        if (static_cast<int>(accepted.size()) < expected)
            note(notes, std::string(tag) + ": proceeding with " + std::to_string(accepted.size()) + " of " +
                            std::to_string(expected) + " terms");
    }
    return accepted;
}

// ---- engine -----------------------------------------------------------------

namespace {

// Wraps the caller's client for one run: counts calls and hashes every
// exchange so the provenance can fingerprint the conversation.
class ExchangeLog : public ChatClient {
public:
    explicit ExchangeLog(ChatClient& inner) : inner_(inner) {}

    ChatResponse chat(const ChatRequest& request) override {
        auto response = inner_.chat(request);
        std::lock_guard lock(mutex_);
        exchanges_.push_back(cache_key(request) + ":" + text::sha256_hex(response.text));
        return response;
    }
    std::string describe() const override { return inner_.describe(); }

    std::uint64_t calls() const {
        std::lock_guard lock(mutex_);
        return exchanges_.size();
    }

    // Order-independent, so concurrent expansions do not perturb it.
    std::string digest() const {
        std::lock_guard lock(mutex_);
        auto sorted = exchanges_;
        std::sort(sorted.begin(), sorted.end());
        return text::sha256_hex(text::join(sorted, "\n"));
    }

private:
    ChatClient& inner_;
    mutable std::mutex mutex_;
    std::vector<std::string> exchanges_;
};

std::vector<std::string> terms_of(const std::vector<Candidate>& pool) {
    std::vector<std::string> out;
    for (const auto& c : pool) out.push_back(c.term);
    return out;
}

} // namespace

ThoughtGraphEngine::ThoughtGraphEngine(ChatClient& chat, const Ontology& ontology, PromptSet prompts)
    : chat_(chat), ontology_(ontology), prompts_(std::move(prompts)) {}

std::vector<std::string> ThoughtGraphEngine::initial_expand(const GeneSetRecord& gene_set, const RunConfig& cfg,
                                                            Notes* notes) const {
    validate(gene_set);
    return generate_distinct_terms(chat_, "initial_expand", prompts_.get(prompt_names::kInitial),
                                   {{"genes", format_genes(gene_set.genes)}}, cfg.initial_branch, {}, cfg, notes);
}

std::vector<std::string> ThoughtGraphEngine::expand_node(const GeneSetRecord& gene_set, std::string_view parent_term,
                                                         const RunConfig& cfg, Notes* notes) const {
    auto parent = text::trim(parent_term);
    if (parent.empty()) throw PreconditionError("expand_node needs a nonempty parent term");
    return generate_distinct_terms(chat_, "expand", prompts_.get(prompt_names::kSubsequent),
                                   {{"genes", format_genes(gene_set.genes)}, {"parent_term", parent}}, cfg.branch,
                                   {parent}, cfg, notes);
}

std::vector<NodeId> ThoughtGraphEngine::vote(const GeneSetRecord& gene_set, const std::vector<Candidate>& pool, int beam,
                                             const RunConfig& cfg, Notes* notes) const {
    if (pool.empty()) throw PreconditionError("vote needs at least one candidate");
    const auto need = static_cast<std::size_t>(std::min<int>(beam, static_cast<int>(pool.size())));
    const auto terms = terms_of(pool);
    std::vector<int> picks;
    if (pool.size() > need) {
        auto req = make_chat_request("vote",
                                     render(prompts_.get(prompt_names::kVote), {{"genes", format_genes(gene_set.genes)},
                                                                                {"candidates", format_candidates(terms)},
                                                                                {"count", std::to_string(need)}}),
                                     cfg);
        for (int attempt = 0;; ++attempt) {
            auto reply = chat(chat_, req).text;
            picks = parse_vote(reply, terms);
            if (picks.size() >= need) break;
            if (attempt >= cfg.vote_retries) {
                note(notes, "vote: no usable ranking after " + std::to_string(attempt + 1) +
                                " attempts; filling with lowest-index candidates");
                break;
            }
            follow_up(req, reply,
                      "Reply with exactly " + std::to_string(need) + " distinct candidate numbers between 1 and " +
                          std::to_string(pool.size()) + ", best first, separated by commas.",
                      "vote_reask");
        }
    }
    picks.resize(std::min(picks.size(), need));
    for (int idx = 1; picks.size() < need; ++idx)
        if (std::find(picks.begin(), picks.end(), idx) == picks.end()) picks.push_back(idx);

    std::vector<NodeId> out;
    for (int idx : picks) out.push_back(pool[static_cast<std::size_t>(idx - 1)].id);
    return out;
}

std::pair<Relation, EdgeSource> ThoughtGraphEngine::label_edge(std::string_view parent_term,
                                                               std::string_view child_term, const RunConfig& cfg,
                                                               Notes* notes) const {
    if (text::trim(parent_term).empty() || text::trim(child_term).empty())
        throw PreconditionError("label_edge needs two nonempty terms");

    if (cfg.edge_label_mode == EdgeLabelMode::OntologyFirst) {
        const auto* p = ontology_.lookup(parent_term);
        const auto* c = ontology_.lookup(child_term);
        auto in_scope = [&](const OntologyTerm* t) {
            return t && (cfg.ground_all_namespaces || t->name_space == "biological_process");
        };
        if (in_scope(p) && in_scope(c)) {
            if (auto r = relation_between(ontology_, p->go_id, c->go_id)) return {*r, EdgeSource::OntologyLookup};
        }
    }

    std::string examples;
    for (Relation r : kAllRelations) {
        for (const auto& ex : sample_relation_examples(ontology_, r,
                                                       static_cast<std::size_t>(cfg.edge_examples_per_relation), cfg.seed)) {
            examples += ex.parent_name + " -> " + ex.child_name + ": " + std::string(relation_name(ex.relation)) + "\n";
        }
    }
    if (examples.empty()) examples = "(none available)";
    else examples.pop_back();

    auto req = make_chat_request("edge_label",
                                 render(prompts_.get(prompt_names::kEdgeLabel), {{"relation_examples", examples},
                                                                                 {"parent_term", text::trim(parent_term)},
                                                                                 {"child_term", text::trim(child_term)}}),
                                 cfg);
    for (int attempt = 0;; ++attempt) {
        auto reply = chat(chat_, req).text;
        if (auto r = parse_relation(reply)) return {*r, EdgeSource::ModelLabeled};
        if (attempt >= cfg.vote_retries) break;
        follow_up(req, reply, "Reply with exactly one of: is_a, part_of, has_part, regulates.", "edge_label_reask");
    }
    note(notes, "edge_label: no relation in reply for '" + std::string(parent_term) + "' -> '" +
                    std::string(child_term) + "'; defaulting to is_a");
    return {Relation::IsA, EdgeSource::ModelLabeled};
}

NodeId ThoughtGraphEngine::choose_final(const GeneSetRecord& gene_set, const std::vector<Candidate>& last_layer,
                                        const RunConfig& cfg, Notes* notes) const {
    if (last_layer.empty()) throw PreconditionError("choose_final needs at least one candidate");
    if (last_layer.size() == 1) return last_layer.front().id;

    const auto terms = terms_of(last_layer);
    auto req = make_chat_request("final",
                                 render(prompts_.get(prompt_names::kFinal), {{"genes", format_genes(gene_set.genes)},
                                                                             {"candidates", format_candidates(terms)}}),
                                 cfg);
    for (int attempt = 0;; ++attempt) {
        auto reply = chat(chat_, req).text;
        auto picks = parse_vote(reply, terms);
        if (!picks.empty()) return last_layer[static_cast<std::size_t>(picks.front() - 1)].id;
        if (attempt >= cfg.vote_retries) break;
        follow_up(req, reply,
                  "Reply with one candidate number between 1 and " + std::to_string(last_layer.size()) + " only.",
                  "final_reask");
    }
    note(notes, "final: no usable choice in reply; taking candidate 1");
    return last_layer.front().id;
}

ThoughtGraph ThoughtGraphEngine::run(const GeneSetRecord& gene_set, const RunConfig& cfg, const Clock& clock) const {
    validate(cfg);
    validate(gene_set);

    ExchangeLog exchanges(chat_);
    ThoughtGraphEngine session(exchanges, ontology_, prompts_);
    Notes notes;

    ThoughtGraph graph(gene_set, cfg);
    graph.provenance().provider = chat_.describe();

    for (const auto& term : session.initial_expand(gene_set, cfg, &notes)) graph.add_node(term, 1);

    auto candidates = [&](int layer) {
        std::vector<Candidate> out;
        for (auto id : graph.layer(layer)) out.push_back({id, graph.node(id).term});
        return out;
    };

    for (int layer = 2; layer <= cfg.depth; ++layer) {
        auto pool = candidates(layer - 1);
        std::vector<NodeId> selected;
        if (cfg.vote_pool == VotePool::Layer) {
            selected = session.vote(gene_set, pool, cfg.beam, cfg, &notes);
        } else {
            // Sibling groups in pool order; beam slots dealt out round-robin.
            std::vector<std::vector<Candidate>> groups;
            std::map<std::optional<NodeId>, std::size_t> group_of;
            for (const auto& c : pool) {
                auto parent = graph.node(c.id).parent;
                auto [it, inserted] = group_of.emplace(parent, groups.size());
                if (inserted) groups.emplace_back();
                groups[it->second].push_back(c);
            }
            const int g = static_cast<int>(groups.size());
            for (int i = 0; i < g; ++i) {
                const int slots = cfg.beam / g + (i < cfg.beam % g ? 1 : 0);
                if (slots == 0) continue;
                auto picks = session.vote(gene_set, groups[static_cast<std::size_t>(i)], slots, cfg, &notes);
                selected.insert(selected.end(), picks.begin(), picks.end());
            }
        }
        graph.mark_voted(selected);

        std::vector<std::vector<std::string>> children(selected.size());
        std::vector<Notes> child_notes(selected.size());
        if (cfg.parallel_expansion && selected.size() > 1) {
            std::vector<std::future<std::vector<std::string>>> jobs;
            for (std::size_t i = 0; i < selected.size(); ++i) {
                jobs.push_back(std::async(std::launch::async, [&, i] {
                    return session.expand_node(gene_set, graph.node(selected[i]).term, cfg, &child_notes[i]);
                }));
            }
            for (std::size_t i = 0; i < jobs.size(); ++i) children[i] = jobs[i].get();
        } else {
            for (std::size_t i = 0; i < selected.size(); ++i)
                children[i] = session.expand_node(gene_set, graph.node(selected[i]).term, cfg, &child_notes[i]);
        }
        for (auto& n : child_notes) notes.insert(notes.end(), n.begin(), n.end());

        for (std::size_t i = 0; i < selected.size(); ++i) {
            const auto parent_term = graph.node(selected[i]).term;
            for (const auto& term : children[i]) {
                auto child = graph.add_node(term, layer, selected[i]);
                auto [relation, source] = session.label_edge(parent_term, term, cfg, &notes);
                graph.add_edge(selected[i], child, relation, source);
            }
        }
        if (graph.layer(layer).empty())
            throw GenerationError("layer " + std::to_string(layer) + " produced no candidates", "");
    }

    graph.set_final_answer(session.choose_final(gene_set, candidates(cfg.depth), cfg, &notes));

    std::map<std::string, int> term_counts;
    for (const auto& n : graph.nodes()) ++term_counts[text::normalize_key(n.term)];
    auto& prov = graph.provenance();
    for (const auto& [term, count] : term_counts)
        if (count > 1) prov.duplicate_terms.push_back(term);
    prov.notes = std::move(notes);
    prov.chat_calls = exchanges.calls();
    prov.exchange_digest = exchanges.digest();
    if (clock) prov.generated_at = clock();

    validate(graph);
    return graph;
}

} // namespace tgraph
