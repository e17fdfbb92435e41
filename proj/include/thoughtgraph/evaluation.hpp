#pragma once

#include "thoughtgraph/llm_gateway.hpp"
#include "thoughtgraph/ontology.hpp"
#include "thoughtgraph/thought_graph.hpp"

#include <cstdint>
#include <map>
#include <mutex>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace tgraph {

// u.v / (|u||v|), raw value in [-1, 1]. Throws DomainError on a zero vector
// and IntegrityError on a dimension mismatch.
double cosine(std::span<const double> u, std::span<const double> v);
double cosine(const EmbeddingVector& u, const EmbeddingVector& v);

enum class PercentileRule {
    StrictBelow,  // 100 * |{d < s}| / N
    MidpointTie,  // 100 * (|{d < s}| + |{d == s}| / 2) / N
};

double percentile(double score, std::span<const double> null, PercentileRule rule = PercentileRule::StrictBelow);

// Memoizes another embedder by exact text. Safe for concurrent use.
class EmbeddingMemo : public Embedder {
public:
    explicit EmbeddingMemo(Embedder& inner) : inner_(inner) {}

    std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override;
    std::string model_tag() const override { return inner_.model_tag(); }

private:
    Embedder& inner_;
    std::mutex mutex_;
    std::unordered_map<std::string, EmbeddingVector> memo_;
};

// Vocabulary embeddings and their norms, computed once; shared read-only.
class VocabularyIndex {
public:
    VocabularyIndex(std::vector<std::string> terms, Embedder& embedder, std::size_t batch = 256);

    const std::vector<std::string>& terms() const { return terms_; }
    std::size_t dim() const { return dim_; }

    // Cosine of v against every vocabulary term, in vocabulary order.
    std::vector<double> similarities(const EmbeddingVector& v) const;

private:
    std::vector<std::string> terms_;
    std::vector<double> rows_;  // row-major, terms_.size() x dim_
    std::vector<double> norms_;
    std::size_t dim_ = 0;
};

std::vector<double> null_distribution(const EmbeddingVector& predicted, const VocabularyIndex& vocabulary);
std::vector<double> null_distribution(std::string_view predicted, std::span<const std::string> vocabulary,
                                      Embedder& embedder);

// The dataset's term names when a dataset is given, else the ontology's
// biological_process names. Order preserved, duplicates dropped.
std::vector<std::string> null_vocabulary(const std::vector<GeneSetRecord>* dataset, const Ontology* ontology);

struct NodeScore {
    double similarity = 0.0;
    double percentile = 0.0;
};

struct GraphScore {
    std::string gene_set_id;
    double predicted_score = 0.0;  // p: final answer
    double best_score = 0.0;       // b: best green node
    double predicted_percentile = 0.0;
    double best_percentile = 0.0;
    NodeId predicted_node;
    NodeId best_node;
    std::map<NodeId, NodeScore> per_node;            // green nodes only
    std::map<int, double> per_layer_mean;            // over every node of the layer
    std::map<int, double> per_layer_voted_mean;      // over green nodes of the layer
};

// Best-of scoring for a flat list of candidate terms (the baselines).
struct TermScore {
    std::string gene_set_id;
    std::vector<std::string> terms;
    std::vector<double> similarities;
    std::vector<double> percentiles;
    std::size_t best_index = 0;
    double best_similarity = 0.0;
    double best_percentile = 0.0;
};

class Scorer {
public:
    Scorer(Embedder& embedder, const VocabularyIndex& vocabulary, PercentileRule rule = PercentileRule::StrictBelow);

    // Throws PreconditionError for an unfinished graph or an empty truth.
    GraphScore score_graph(const ThoughtGraph& graph, std::string_view truth) const;
    TermScore score_terms(const std::vector<std::string>& terms, std::string_view truth) const;

private:
    EmbeddingVector embed_one(const std::string& text) const;

    Embedder& embedder_;
    const VocabularyIndex& vocabulary_;
    PercentileRule rule_;
};

// One row of a results table.
struct EvalReport {
    std::string method;
    double mean_similarity = 0.0;
    double mean_percentile = 0.0;
    double prop_percentile_gt99 = 0.0;
    std::size_t n_samples = 0;
};

EvalReport aggregate(std::span<const double> similarities, std::span<const double> percentiles,
                     std::string method = {});

enum class ScoreKind { Predicted, Best };
EvalReport aggregate(std::span<const GraphScore> scores, ScoreKind kind, std::string method = {});
EvalReport aggregate(std::span<const TermScore> scores, std::string method = {});

// Published results table, in percent.
struct ReferenceRow {
    std::string method;
    double similarity_pct;
    double percentile_pct;
    double gt99_pct;
};
const std::vector<ReferenceRow>& reference_rows();

struct LayerSummary {
    std::size_t n = 0;
    double mean = 0, median = 0, q1 = 0, q3 = 0, min = 0, max = 0;
};

// Quartiles by linear interpolation between order statistics.
LayerSummary summarize(std::vector<double> values);

// Per-layer distribution of the per-sample layer means.
std::map<int, LayerSummary> layer_stats(std::span<const GraphScore> scores, bool voted_only = false);

// Uniform sample without replacement, deterministic in seed.
std::vector<GeneSetRecord> sample_dataset(std::span<const GeneSetRecord> records, std::size_t n, std::uint64_t seed);

// ---- report files ---------------------------------------------------------

struct CorpusReport {
    std::vector<EvalReport> rows;
    std::vector<GraphScore> graph_scores;
    std::vector<TermScore> term_scores;
    std::string embedder_tag;
    PercentileRule rule = PercentileRule::StrictBelow;
    std::size_t vocabulary_size = 0;
};

std::string report_to_json(const CorpusReport& report);
// Method, Similarity, Percentile, Percentile>99% in percent; computed rows
// first, then the published reference rows.
std::string report_to_tsv(const CorpusReport& report);
// layer,series,n,mean,median,q1,q3,min,max
std::string layer_stats_to_csv(std::span<const GraphScore> scores);

} // namespace tgraph
