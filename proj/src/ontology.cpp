#include "thoughtgraph/ontology.hpp"

#include "thoughtgraph/error.hpp"
#include "thoughtgraph/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <istream>
#include <random>
#include <set>
#include <sstream>

namespace tgraph {

using nlohmann::json;

std::string_view relation_name(Relation r) {
    switch (r) {
    case Relation::IsA: return "is_a";
    case Relation::PartOf: return "part_of";
    case Relation::HasPart: return "has_part";
    case Relation::Regulates: return "regulates";
    }
    return "is_a";
}

std::optional<Relation> relation_from_name(std::string_view name) {
    for (Relation r : kAllRelations)
        if (relation_name(r) == name) return r;
    return std::nullopt;
}

namespace {

bool valid_go_id(std::string_view id) {
    if (id.size() != 10 || id.substr(0, 3) != "GO:") return false;
    return std::all_of(id.begin() + 3, id.end(), [](char c) { return c >= '0' && c <= '9'; });
}

// First whitespace-delimited token, ignoring "! comment" and "{qualifiers}".
std::string first_token(std::string_view value) {
    std::istringstream ss{std::string(value)};
    std::string tok;
    ss >> tok;
    return tok;
}

// Strips a trailing "! comment" that is not escaped.
std::string strip_comment(std::string_view value) {
    for (std::size_t i = 0; i < value.size(); ++i) {
        if (value[i] == '\\') {
            ++i;
            continue;
        }
        if (value[i] == '!') return text::trim(value.substr(0, i));
    }
    return text::trim(value);
}

} // namespace

std::size_t Ontology::count_diagnostics(std::string_view kind) const {
    return static_cast<std::size_t>(std::count_if(diagnostics_.begin(), diagnostics_.end(),
                                                  [&](const ParseDiagnostic& d) { return d.kind == kind; }));
}

const OntologyTerm* Ontology::lookup(std::string_view key) const {
    auto trimmed = text::trim(key);
    if (auto it = terms_.find(trimmed); it != terms_.end()) return &it->second;
    if (auto it = name_index_.find(text::normalize_key(trimmed)); it != name_index_.end())
        return &terms_.at(it->second);
    return nullptr;
}

bool OntologyBuilder::add(OntologyTerm term, std::size_t line) {
    if (seen_.count(term.go_id)) {
        diagnose("duplicate_id", line, "duplicate term id " + term.go_id + " ignored");
        return false;
    }
    seen_.emplace(term.go_id, pending_.size());
    pending_.emplace_back(std::move(term), line);
    return true;
}

void OntologyBuilder::diagnose(std::string kind, std::size_t line, std::string message) {
    diagnostics_.push_back({std::move(kind), line, std::move(message)});
}

Ontology OntologyBuilder::build() && {
    Ontology out;
    for (auto& [term, line] : pending_) {
        auto dangling = [&, line = line](const std::string& target) {
            if (seen_.count(target)) return false;
            diagnostics_.push_back({"dangling_target", line, term.go_id + " references unknown " + target});
            return true;
        };
        std::erase_if(term.parents_is_a, dangling);
        std::erase_if(term.relations, [&](const auto& rel) { return dangling(rel.second); });
    }
    // Name index in stanza order so the first-seen term keeps a contested name.
    for (auto& [term, line] : pending_) {
        if (!term.obsolete) {
            auto key = text::normalize_key(term.name);
            auto [it, inserted] = out.name_index_.emplace(key, term.go_id);
            if (!inserted)
                diagnostics_.push_back({"name_collision", line,
                                        "name '" + term.name + "' of " + term.go_id + " already used by " + it->second});
        }
        std::string id = term.go_id;
        out.terms_.emplace(std::move(id), std::move(term));
    }
    out.diagnostics_ = std::move(diagnostics_);
    return out;
}

Ontology parse_obo(std::istream& in) {
    OntologyBuilder builder;
    std::optional<OntologyTerm> current;
    std::size_t stanza_line = 0;
    bool in_term = false;

    auto flush = [&]() {
        if (!current) return;
        if (current->go_id.empty())
            builder.diagnose("missing_id", stanza_line, "[Term] stanza without id skipped");
        else
            builder.add(std::move(*current), stanza_line);
        current.reset();
    };

    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        if (!raw.empty() && raw.back() == '\r') raw.pop_back();
        auto line = text::trim(raw);
        if (line.empty() || line[0] == '!') continue;

        if (line[0] == '[') {
            if (line.size() < 3 || line.back() != ']')
                throw ParseError("malformed stanza header '" + line + "'", line_no);
            flush();
            auto name = line.substr(1, line.size() - 2);
            in_term = name == "Term";
            if (in_term) {
                current.emplace();
                current->name_space.clear();
                stanza_line = line_no;
            }
            continue;
        }
        if (!in_term) continue;

        auto colon = line.find(':');
        if (colon == std::string::npos) {
            builder.diagnose("malformed_line", line_no, "tag-value line without ':'");
            continue;
        }
        auto tag = text::trim(std::string_view(line).substr(0, colon));
        auto value = strip_comment(std::string_view(line).substr(colon + 1));

        if (tag == "id") {
            if (!valid_go_id(value)) {
                builder.diagnose("invalid_id", line_no, "term id '" + value + "' is not a GO identifier");
                in_term = false;
                current.reset();
                continue;
            }
            current->go_id = value;
        } else if (tag == "name") {
            current->name = value;
        } else if (tag == "namespace") {
            current->name_space = value;
        } else if (tag == "is_a") {
            current->parents_is_a.push_back(first_token(value));
        } else if (tag == "is_obsolete") {
            current->obsolete = value == "true";
        } else if (tag == "relationship") {
            std::istringstream ss(value);
            std::string type, target;
            ss >> type >> target;
            if (target.empty()) {
                builder.diagnose("malformed_line", line_no, "relationship without target");
                continue;
            }
            if (type == "part_of") {
                current->relations.emplace_back(Relation::PartOf, target);
            } else if (type == "has_part") {
                current->relations.emplace_back(Relation::HasPart, target);
            } else if (type == "regulates") {
                current->relations.emplace_back(Relation::Regulates, target);
            } else if (type == "positively_regulates" || type == "negatively_regulates") {
                current->relations.emplace_back(Relation::Regulates, target);
                builder.diagnose("regulation_subtype", line_no, type + " " + target + " recorded as regulates");
            } else {
                builder.diagnose("unsupported_relation", line_no, "relationship type '" + type + "' dropped");
            }
        }
    }
    flush();
    return std::move(builder).build();
}

Ontology parse_obo_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    return parse_obo(in);
}

std::optional<OntologyTerm> lookup_term(const Ontology& ontology, std::string_view key) {
    if (const auto* t = ontology.lookup(key)) return *t;
    return std::nullopt;
}

namespace {

bool has_relation(const OntologyTerm& term, Relation r, const std::string& target) {
    return std::any_of(term.relations.begin(), term.relations.end(),
                       [&](const auto& rel) { return rel.first == r && rel.second == target; });
}

} // namespace

std::optional<Relation> relation_between(const Ontology& ontology, std::string_view parent_key,
                                         std::string_view child_key) {
    const auto* parent = ontology.lookup(parent_key);
    if (!parent) throw LookupError("unknown term '" + std::string(parent_key) + "'");
    const auto* child = ontology.lookup(child_key);
    if (!child) throw LookupError("unknown term '" + std::string(child_key) + "'");

    const auto& p = parent->go_id;
    const auto& c = child->go_id;
    if (std::find(child->parents_is_a.begin(), child->parents_is_a.end(), p) != child->parents_is_a.end())
        return Relation::IsA;
    if (has_relation(*child, Relation::PartOf, p)) return Relation::PartOf;
    if (has_relation(*parent, Relation::HasPart, c)) return Relation::HasPart;
    if (has_relation(*parent, Relation::Regulates, c)) return Relation::Regulates;
    return std::nullopt;
}

std::vector<RelationExample> sample_relation_examples(const Ontology& ontology, Relation relation,
                                                      std::size_t count, std::uint64_t seed) {
    // Candidate (parent_id, child_id) pairs, confirmed through relation_between
    // so precedence between overlapping links is respected.
    std::set<std::pair<std::string, std::string>> pairs;
    for (const auto& [id, term] : ontology.terms()) {
        if (term.obsolete) continue;
        if (relation == Relation::IsA) {
            for (const auto& p : term.parents_is_a) pairs.emplace(p, id);
        }
        for (const auto& [r, target] : term.relations) {
            if (r != relation) continue;
            if (r == Relation::PartOf)
                pairs.emplace(target, id);
            else
                pairs.emplace(id, target);
        }
    }
    std::vector<RelationExample> pool;
    for (const auto& [p, c] : pairs) {
        const auto& pt = ontology.terms().at(p);
        const auto& ct = ontology.terms().at(c);
        if (pt.obsolete || ct.obsolete) continue;
        // Skip pairs whose names do not resolve back to these ids.
        if (ontology.lookup(pt.name) != &pt || ontology.lookup(ct.name) != &ct) continue;
        if (relation_between(ontology, p, c) != relation) continue;
        pool.push_back({pt.name, ct.name, relation});
    }
    std::mt19937_64 rng(seed);
    const auto take = std::min(count, pool.size());
    for (std::size_t i = 0; i < take; ++i) {
        auto j = i + text::uniform_below(rng, pool.size() - i);
        std::swap(pool[i], pool[j]);
    }
    pool.resize(take);
    return pool;
}

std::vector<std::string> bp_term_names(const Ontology& ontology) {
    std::vector<std::string> names;
    for (const auto& [id, term] : ontology.terms())
        if (!term.obsolete && term.name_space == "biological_process") names.push_back(term.name);
    std::sort(names.begin(), names.end());
    return names;
}

std::string ontology_to_json(const Ontology& ontology) {
    json terms = json::array();
    for (const auto& [id, t] : ontology.terms()) {
        json rels = json::array();
        for (const auto& [r, target] : t.relations) rels.push_back({std::string(relation_name(r)), target});
        terms.push_back({{"go_id", t.go_id},
                         {"name", t.name},
                         {"namespace", t.name_space},
                         {"is_a", t.parents_is_a},
                         {"relations", rels},
                         {"obsolete", t.obsolete}});
    }
    json diags = json::array();
    for (const auto& d : ontology.diagnostics())
        diags.push_back({{"kind", d.kind}, {"line", d.line}, {"message", d.message}});
    json doc = {{"schema_version", 1}, {"terms", terms}, {"diagnostics", diags}};
    return doc.dump(1) + "\n";
}

Ontology ontology_from_json(std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ParseError(std::string("term index is not valid JSON: ") + e.what());
    }
    try {
        if (doc.at("schema_version").get<int>() != 1) throw ParseError("unsupported term index schema_version");
        OntologyBuilder builder;
        for (const auto& j : doc.at("terms")) {
            OntologyTerm t;
            t.go_id = j.at("go_id").get<std::string>();
            t.name = j.at("name").get<std::string>();
            t.name_space = j.at("namespace").get<std::string>();
            t.parents_is_a = j.at("is_a").get<std::vector<std::string>>();
            for (const auto& rel : j.at("relations")) {
                auto r = relation_from_name(rel.at(0).get<std::string>());
                if (!r) throw ParseError("unknown relation in term index: " + rel.at(0).dump());
                t.relations.emplace_back(*r, rel.at(1).get<std::string>());
            }
            t.obsolete = j.at("obsolete").get<bool>();
            builder.add(std::move(t));
        }
        Ontology out = std::move(builder).build();
        out.diagnostics_.clear();
        for (const auto& d : doc.at("diagnostics"))
            out.diagnostics_.push_back(
                {d.at("kind").get<std::string>(), d.at("line").get<std::size_t>(), d.at("message").get<std::string>()});
        return out;
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed term index: ") + e.what());
    }
}

Ontology load_ontology(const std::string& path) {
    auto content = text::read_file(path);
    auto first = content.find_first_not_of(" \t\r\n");
    if (first != std::string::npos && content[first] == '{') return ontology_from_json(content);
    std::istringstream in(content);
    return parse_obo(in);
}

} // namespace tgraph
