#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

namespace tgraph {

enum class EdgeLabelMode { OntologyFirst, ModelOnly };

// Layer: one vote over every candidate of a layer.
// PerBranch: each sibling group votes separately, beam slots split across groups.
enum class VotePool { Layer, PerBranch };

// Parameters of one thought-graph run. Defaults give the 3 / 2x2 / depth-5
// schedule with temperature 0.7.
struct RunConfig {
    int depth = 5;
    int initial_branch = 3;
    int branch = 2;
    int beam = 2;
    double temperature = 0.7;
    std::string model = "gpt-4-1106-preview";
    std::optional<int> max_tokens;
    // Re-asks after the first attempt when a reply cannot be parsed.
    int vote_retries = 2;
    EdgeLabelMode edge_label_mode = EdgeLabelMode::OntologyFirst;
    VotePool vote_pool = VotePool::Layer;
    int edge_examples_per_relation = 2;
    // Ground edges against every namespace, not just biological_process.
    bool ground_all_namespaces = false;
    bool parallel_expansion = true;
    std::uint64_t seed = 0;

    bool operator==(const RunConfig&) const = default;
};

// Throws ConfigError on out-of-range values.
void validate(const RunConfig& cfg);

nlohmann::json to_json(const RunConfig& cfg);
// Fields missing from j keep the values already in base.
RunConfig config_from_json(const nlohmann::json& j, RunConfig base = {});

std::string_view edge_label_mode_name(EdgeLabelMode m);
std::string_view vote_pool_name(VotePool p);

} // namespace tgraph
