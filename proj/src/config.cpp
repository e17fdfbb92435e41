#include "thoughtgraph/config.hpp"

#include "thoughtgraph/error.hpp"

namespace tgraph {

using nlohmann::json;

void validate(const RunConfig& cfg) {
    if (cfg.depth < 2) throw ConfigError("depth must be at least 2");
    if (cfg.initial_branch < 1) throw ConfigError("k_init must be at least 1");
    if (cfg.branch < 1) throw ConfigError("k_sub must be at least 1");
    if (cfg.beam < 1) throw ConfigError("beam must be at least 1");
    if (!(cfg.temperature >= 0.0 && cfg.temperature <= 2.0)) throw ConfigError("temperature must lie in [0, 2]");
    if (cfg.model.empty()) throw ConfigError("model name is empty");
    if (cfg.max_tokens && *cfg.max_tokens < 1) throw ConfigError("max_tokens must be positive");
    if (cfg.vote_retries < 0) throw ConfigError("vote_retries must be non-negative");
    if (cfg.edge_examples_per_relation < 0) throw ConfigError("edge_examples_per_relation must be non-negative");
}

std::string_view edge_label_mode_name(EdgeLabelMode m) {
    return m == EdgeLabelMode::OntologyFirst ? "ontology_first" : "model_only";
}

std::string_view vote_pool_name(VotePool p) { return p == VotePool::Layer ? "layer" : "per_branch"; }

json to_json(const RunConfig& cfg) {
    json j = {{"depth", cfg.depth},
              {"k_init", cfg.initial_branch},
              {"k_sub", cfg.branch},
              {"beam", cfg.beam},
              {"temperature", cfg.temperature},
              {"model", cfg.model},
              {"vote_retries", cfg.vote_retries},
              {"edge_label_mode", edge_label_mode_name(cfg.edge_label_mode)},
              {"vote_pool", vote_pool_name(cfg.vote_pool)},
              {"edge_examples_per_relation", cfg.edge_examples_per_relation},
              {"ground_all_namespaces", cfg.ground_all_namespaces},
              {"parallel_expansion", cfg.parallel_expansion},
              {"seed", cfg.seed}};
    j["max_tokens"] = cfg.max_tokens ? json(*cfg.max_tokens) : json(nullptr);
    return j;
}

RunConfig config_from_json(const json& j, RunConfig cfg) {
    if (!j.is_object()) throw ConfigError("run configuration must be a JSON object");
    try {
        for (const auto& [key, value] : j.items()) {
            if (key == "depth") cfg.depth = value.get<int>();
            else if (key == "k_init") cfg.initial_branch = value.get<int>();
            else if (key == "k_sub") cfg.branch = value.get<int>();
            else if (key == "beam") cfg.beam = value.get<int>();
            else if (key == "temperature") cfg.temperature = value.get<double>();
            else if (key == "model") cfg.model = value.get<std::string>();
            else if (key == "max_tokens") cfg.max_tokens = value.is_null() ? std::nullopt : std::optional<int>(value.get<int>());
            else if (key == "vote_retries") cfg.vote_retries = value.get<int>();
            else if (key == "edge_label_mode") {
                auto s = value.get<std::string>();
                if (s == "ontology_first") cfg.edge_label_mode = EdgeLabelMode::OntologyFirst;
                else if (s == "model_only") cfg.edge_label_mode = EdgeLabelMode::ModelOnly;
                else throw ConfigError("unknown edge_label_mode '" + s + "'");
            } else if (key == "vote_pool") {
                auto s = value.get<std::string>();
                if (s == "layer") cfg.vote_pool = VotePool::Layer;
                else if (s == "per_branch") cfg.vote_pool = VotePool::PerBranch;
                else throw ConfigError("unknown vote_pool '" + s + "'");
            } else if (key == "edge_examples_per_relation") cfg.edge_examples_per_relation = value.get<int>();
            else if (key == "ground_all_namespaces") cfg.ground_all_namespaces = value.get<bool>();
            else if (key == "parallel_expansion") cfg.parallel_expansion = value.get<bool>();
            else if (key == "seed") cfg.seed = value.get<std::uint64_t>();
            else throw ConfigError("unknown configuration key '" + key + "'");
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("bad configuration value: ") + e.what());
    }
    return cfg;
}

} // namespace tgraph
