#include "thoughtgraph/prompts.hpp"

#include "thoughtgraph/error.hpp"
#include "thoughtgraph/text.hpp"

#include <algorithm>
#include <cctype>
#include <filesystem>

namespace tgraph {

namespace {

bool placeholder_char(char c) { return std::islower(static_cast<unsigned char>(c)) || c == '_' || std::isdigit(static_cast<unsigned char>(c)); }

// Calls fn(begin, end, name) for every {name} marker.
template <typename Fn>
void scan_markers(std::string_view s, Fn&& fn) {
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] != '{') continue;
        std::size_t j = i + 1;
        while (j < s.size() && placeholder_char(s[j])) ++j;
        if (j < s.size() && s[j] == '}' && j > i + 1) {
            fn(i, j + 1, s.substr(i + 1, j - i - 1));
            i = j;
        }
    }
}

std::string substitute(std::string_view s, const Bindings& bindings, const std::string& tpl_name) {
    std::string out;
    std::size_t last = 0;
    scan_markers(s, [&](std::size_t b, std::size_t e, std::string_view name) {
        auto it = bindings.find(std::string(name));
        if (it == bindings.end())
            throw ValidationError("template '" + tpl_name + "' has unbound placeholder {" + std::string(name) + "}");
        out.append(s.substr(last, b - last));
        out.append(it->second);
        last = e;
    });
    out.append(s.substr(last));
    return out;
}

const char* kSystem =
    "You are an expert molecular biologist. You annotate human gene sets with the biological processes they take "
    "part in, using Gene Ontology style process names.";

} // namespace

std::vector<std::string> placeholders(std::string_view s) {
    std::vector<std::string> out;
    scan_markers(s, [&](std::size_t, std::size_t, std::string_view name) {
        if (std::find(out.begin(), out.end(), name) == out.end()) out.emplace_back(name);
    });
    return out;
}

RenderedPrompt render(const PromptTemplate& tpl, const Bindings& bindings) {
    return {substitute(tpl.system_text, bindings, tpl.name), substitute(tpl.user_template, bindings, tpl.name)};
}

PromptSet PromptSet::defaults() {
    using namespace prompt_names;
    PromptSet set;
    set.set({std::string(kInitial), kSystem,
             "Genes: {genes}\n\n"
             "Name {count} distinct high-level biological processes that this gene set takes part in as a whole. "
             "Prefer broad, general processes over narrow ones.\n"
             "Answer with a numbered list of exactly {count} process names and nothing else."});
    set.set({std::string(kSubsequent), kSystem,
             "Genes: {genes}\n\n"
             "A general biological process for this gene set is \"{parent_term}\". "
             "Name {count} distinct biological processes that are more specific than \"{parent_term}\" and that "
             "this gene set takes part in. Do not repeat \"{parent_term}\".\n"
             "Answer with a numbered list of exactly {count} process names and nothing else."});
    set.set({std::string(kVote), kSystem,
             "Genes: {genes}\n\n"
             "Candidate biological processes:\n{candidates}\n\n"
             "Pick the {count} candidates that describe this gene set most accurately, best first.\n"
             "Reply with the candidate numbers only, separated by commas."});
    set.set({std::string(kFinal), kSystem,
             "Genes: {genes}\n\n"
             "Candidate biological processes:\n{candidates}\n\n"
             "Which single candidate is the best name for the biological process of this gene set?\n"
             "Reply with the candidate number only."});
    set.set({std::string(kEdgeLabel), kSystem,
             "Gene Ontology links a general biological process (parent) to a more specific one (child) with one of "
             "four relations:\n"
             "is_a: the child is a subtype of the parent.\n"
             "part_of: the child always occurs as a part of the parent.\n"
             "has_part: the parent always includes the child as a part.\n"
             "regulates: the parent always regulates the child.\n\n"
             "Examples from Gene Ontology (parent -> child: relation):\n{relation_examples}\n\n"
             "Parent: {parent_term}\nChild: {child_term}\n"
             "Reply with exactly one of: is_a, part_of, has_part, regulates."});
    set.set({std::string(kIoZeroShot), kSystem,
             "Genes: {genes}\n\n"
             "What is the most prominent biological process performed by this gene set?\n"
             "Answer with one biological process name and nothing else."});
    set.set({std::string(kIoZeroShot9), kSystem,
             "Genes: {genes}\n\n"
             "Name {count} distinct biological processes that could describe the function of this gene set.\n"
             "Answer with a numbered list of exactly {count} process names and nothing else."});
    set.set({std::string(kFewShot), kSystem,
             "Name the most prominent biological process performed by each gene set.\n\n"
             "{exemplars}\n\n"
             "Genes: {genes}\nProcess:"});
    set.set({std::string(kCot), kSystem,
             "Genes: {genes}\n\n"
             "Two lines of reasoning about this gene set, each going from a general process to more specific ones:\n"
             "{pathways}\n\n"
             "Think step by step along each pathway and weigh which processes are best supported by the genes. "
             "Then give the single most prominent biological process of the gene set on a last line of the form "
             "\"Answer: <process name>\"."});
    return set;
}

PromptSet PromptSet::from_directory(const std::string& dir) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir)) throw ConfigError("template directory " + dir + " does not exist");
    auto set = defaults();
    const auto names = set.all();
    for (const auto& [name, tpl] : names) {
        auto path = fs::path(dir) / (name + ".txt");
        if (fs::exists(path)) set.set(parse_template_file(name, text::read_file(path.string())));
    }
    return set;
}

const PromptTemplate& PromptSet::get(std::string_view name) const {
    auto it = templates_.find(name);
    if (it == templates_.end()) throw ConfigError("no prompt template named '" + std::string(name) + "'");
    return it->second;
}

void PromptSet::set(PromptTemplate tpl) {
    auto name = tpl.name;
    templates_.insert_or_assign(std::move(name), std::move(tpl));
}

PromptTemplate parse_template_file(std::string name, std::string_view content) {
    auto sys = content.find("[system]\n");
    auto usr = content.find("[user]\n");
    if (sys == std::string_view::npos || usr == std::string_view::npos || usr < sys)
        throw ParseError("template '" + name + "' needs a [system] section followed by a [user] section");
    auto body = [](std::string_view s) {
        while (!s.empty() && s.back() == '\n') s.remove_suffix(1);
        return std::string(s);
    };
    auto system_text = body(content.substr(sys + 9, usr - sys - 9));
    auto user_text = body(content.substr(usr + 7));
    return {std::move(name), std::move(system_text), std::move(user_text)};
}

std::string format_template_file(const PromptTemplate& tpl) {
    return "[system]\n" + tpl.system_text + "\n\n[user]\n" + tpl.user_template + "\n";
}

} // namespace tgraph
