#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace tgraph {

// The four Gene Ontology relations used as edge labels. In every case the
// child of an edge is the more specific term.
enum class Relation { IsA, PartOf, HasPart, Regulates };

inline constexpr Relation kAllRelations[] = {Relation::IsA, Relation::PartOf, Relation::HasPart,
                                             Relation::Regulates};

// "is_a", "part_of", "has_part", "regulates".
std::string_view relation_name(Relation r);
std::optional<Relation> relation_from_name(std::string_view name);

struct OntologyTerm {
    std::string go_id;
    std::string name;
    std::string name_space;
    std::vector<std::string> parents_is_a;
    std::vector<std::pair<Relation, std::string>> relations;
    bool obsolete = false;

    bool operator==(const OntologyTerm&) const = default;
};

struct ParseDiagnostic {
    std::string kind;  // name_collision, dangling_target, regulation_subtype, ...
    std::size_t line = 0;
    std::string message;

    bool operator==(const ParseDiagnostic&) const = default;
};

// A relation exemplar oriented general -> specific.
struct RelationExample {
    std::string parent_name;
    std::string child_name;
    Relation relation;

    bool operator==(const RelationExample&) const = default;
};

// Immutable after construction; concurrent reads are safe.
class Ontology {
public:
    Ontology() = default;

    const std::map<std::string, OntologyTerm>& terms() const { return terms_; }
    const std::map<std::string, std::string>& name_index() const { return name_index_; }
    const std::vector<ParseDiagnostic>& diagnostics() const { return diagnostics_; }
    std::size_t size() const { return terms_.size(); }
    bool empty() const { return terms_.empty(); }

    std::size_t count_diagnostics(std::string_view kind) const;

    // Accepts a GO id or a case-insensitive term name.
    const OntologyTerm* lookup(std::string_view key) const;

    bool operator==(const Ontology& other) const {
        return terms_ == other.terms_ && name_index_ == other.name_index_ && diagnostics_ == other.diagnostics_;
    }

private:
    friend class OntologyBuilder;
    friend Ontology ontology_from_json(std::string_view json_text);

    std::map<std::string, OntologyTerm> terms_;
    std::map<std::string, std::string> name_index_;
    std::vector<ParseDiagnostic> diagnostics_;
};

// Assembles an Ontology: drops dangling relation targets and builds the
// name index (first-seen wins, collisions logged).
class OntologyBuilder {
public:
    // Returns false (and logs) when the id is already taken.
    bool add(OntologyTerm term, std::size_t line = 0);
    void diagnose(std::string kind, std::size_t line, std::string message);
    Ontology build() &&;

private:
    std::vector<std::pair<OntologyTerm, std::size_t>> pending_;
    std::map<std::string, std::size_t> seen_;
    std::vector<ParseDiagnostic> diagnostics_;
};

// OBO 1.2/1.4 flat file. Only [Term] stanzas are read.
Ontology parse_obo(std::istream& in);
Ontology parse_obo_file(const std::string& path);

std::optional<OntologyTerm> lookup_term(const Ontology& ontology, std::string_view key);

// Direct relation oriented so the child is the more specific term.
// Throws LookupError when either key does not resolve.
std::optional<Relation> relation_between(const Ontology& ontology, std::string_view parent_key,
                                         std::string_view child_key);

// Deterministic given seed; never returns duplicate pairs. Pairs with an
// obsolete endpoint are not offered.
std::vector<RelationExample> sample_relation_examples(const Ontology& ontology, Relation relation,
                                                      std::size_t count, std::uint64_t seed);

// Sorted names of non-obsolete biological_process terms.
std::vector<std::string> bp_term_names(const Ontology& ontology);

// Term-index JSON: {"schema_version", "terms": [...], "diagnostics": [...]}.
std::string ontology_to_json(const Ontology& ontology);
Ontology ontology_from_json(std::string_view json_text);

// Loads either an OBO file or a term index, by content sniffing.
Ontology load_ontology(const std::string& path);

} // namespace tgraph
