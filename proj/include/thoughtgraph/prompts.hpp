#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace tgraph {

// A named prompt. user_template (and system_text) may contain {placeholder}
// markers, e.g. {genes}, {parent_term}, {candidates}, {count},
// {relation_examples}.
struct PromptTemplate {
    std::string name;
    std::string system_text;
    std::string user_template;

    bool operator==(const PromptTemplate&) const = default;
};

struct RenderedPrompt {
    std::string system;
    std::string user;
};

using Bindings = std::map<std::string, std::string>;

// Substitutes every {name}. Throws ValidationError when a marker has no
// binding, so a rendered prompt never carries a residual placeholder.
RenderedPrompt render(const PromptTemplate& tpl, const Bindings& bindings);

// Placeholder names appearing in s, in order of first appearance.
std::vector<std::string> placeholders(std::string_view s);

// Templates used by the engine and the baselines.
namespace prompt_names {
inline constexpr std::string_view kInitial = "initial";
inline constexpr std::string_view kSubsequent = "subsequent";
inline constexpr std::string_view kVote = "vote";
inline constexpr std::string_view kFinal = "final";
inline constexpr std::string_view kEdgeLabel = "edge_label";
inline constexpr std::string_view kIoZeroShot = "io_zero_shot";
inline constexpr std::string_view kIoZeroShot9 = "io_zero_shot_9";
inline constexpr std::string_view kFewShot = "few_shot";
inline constexpr std::string_view kCot = "cot";
} // namespace prompt_names

class PromptSet {
public:
    // Built-in defaults for every name above.
    static PromptSet defaults();

    // Defaults overridden by any "<name>.txt" found in dir.
    static PromptSet from_directory(const std::string& dir);

    const PromptTemplate& get(std::string_view name) const;
    void set(PromptTemplate tpl);
    const std::map<std::string, PromptTemplate, std::less<>>& all() const { return templates_; }

private:
    std::map<std::string, PromptTemplate, std::less<>> templates_;
};

// Template file layout: a "[system]" section and a "[user]" section.
PromptTemplate parse_template_file(std::string name, std::string_view content);
std::string format_template_file(const PromptTemplate& tpl);

} // namespace tgraph
