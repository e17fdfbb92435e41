// Regenerates the recorded transcript and the dictionary embeddings used by
// the CLI and acceptance tests.
//
//   make_fixtures <mini_go.obo> <dataset.tsv> <exemplars.tsv> <transcript.json> <embeddings.json>

#include "scripted_runs.hpp"

#include "thoughtgraph/baselines.hpp"
#include "thoughtgraph/dataset.hpp"
#include "thoughtgraph/engine.hpp"
#include "thoughtgraph/evaluation.hpp"
#include "thoughtgraph/ontology.hpp"
#include "thoughtgraph/text.hpp"

#include <json.hpp>

#include <cmath>
#include <iostream>
#include <set>

using namespace tgraph;

namespace {

constexpr std::size_t kDim = 16;

// Bag of hashed words, so terms sharing words land close together.
std::vector<double> word_hash_vector(const std::string& term) {
    std::vector<double> v(kDim, 0.0);
    std::string word;
    auto flush = [&] {
        if (word.empty()) return;
        auto h = text::sha256_hex(word);
        for (std::size_t i = 0; i < kDim; ++i) {
            int byte = std::stoi(h.substr(2 * i, 2), nullptr, 16);
            v[i] += (byte - 127.5) / 127.5;
        }
        word.clear();
    };
    for (char c : text::normalize_key(term)) {
        if (c == ' ' || c == '-' || c == '/') flush();
        else word += c;
    }
    flush();
    for (auto& x : v) x = std::round(x * 1e6) / 1e6;
    return v;
}

} // namespace

int main(int argc, char** argv) {
    if (argc != 6) {
        std::cerr << "usage: make_fixtures OBO DATASET EXEMPLARS TRANSCRIPT_OUT EMBEDDINGS_OUT\n";
        return 2;
    }
    try {
        auto ontology = load_ontology(argv[1]);
        auto dataset = ingest_dataset(argv[2]);
        auto exemplars = load_exemplars(argv[3]);

        testing::RuleChat rules(testing::scripted_rule());
        RecordingChat recorder(rules);
        ThoughtGraphEngine engine(recorder, ontology);
        BaselineRunner baselines(recorder);

        RunConfig cfg;
        cfg.parallel_expansion = false;

        std::set<std::string> terms;
        for (const auto& record : dataset) {
            auto graph = engine.run(record, cfg);
            for (const auto& n : graph.nodes()) terms.insert(n.term);
            terms.insert(*record.ground_truth_name);
            terms.insert(baselines.io_zero_shot(record, cfg));
            for (auto& t : baselines.io_zero_shot_9(record, cfg)) terms.insert(t);
            terms.insert(baselines.few_shot(record, exemplars, cfg));
            terms.insert(baselines.cot(record, graph, cfg));
        }
        for (const auto& name : bp_term_names(ontology)) terms.insert(name);

        text::write_file_atomic(argv[4], transcript_to_json(recorder.transcript()));

        nlohmann::json vectors = nlohmann::json::object();
        for (const auto& t : terms) vectors[t] = word_hash_vector(t);
        nlohmann::json doc = {{"model", "word-hash-16"}, {"vectors", vectors}};
        text::write_file_atomic(argv[5], doc.dump(1) + "\n");
        std::cout << recorder.transcript().entries.size() << " exchanges, " << terms.size() << " terms\n";
    } catch (const std::exception& e) {
        std::cerr << "make_fixtures: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
