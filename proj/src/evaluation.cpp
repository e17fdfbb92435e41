#include "thoughtgraph/evaluation.hpp"

#include "thoughtgraph/error.hpp"
#include "thoughtgraph/text.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace tgraph {

using nlohmann::json;

double cosine(std::span<const double> u, std::span<const double> v) {
    if (u.size() != v.size())
        throw IntegrityError("cosine of vectors with dims " + std::to_string(u.size()) + " and " +
                             std::to_string(v.size()));
    double dot = 0.0, uu = 0.0, vv = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        dot += u[i] * v[i];
        uu += u[i] * u[i];
        vv += v[i] * v[i];
    }
    if (uu == 0.0 || vv == 0.0) throw DomainError("cosine of a zero vector");
    return std::clamp(dot / (std::sqrt(uu) * std::sqrt(vv)), -1.0, 1.0);
}

double cosine(const EmbeddingVector& u, const EmbeddingVector& v) {
    if (u.dim != v.dim) throw IntegrityError("embedding dims differ");
    return cosine(std::span<const double>(u.values), std::span<const double>(v.values));
}

double percentile(double score, std::span<const double> null, PercentileRule rule) {
    if (null.empty()) throw PreconditionError("percentile against an empty null distribution");
    std::size_t below = 0, equal = 0;
    for (double d : null) {
        if (d < score) ++below;
        else if (d == score) ++equal;
    }
    double rank = static_cast<double>(below);
    if (rule == PercentileRule::MidpointTie) rank += 0.5 * static_cast<double>(equal);
    return 100.0 * rank / static_cast<double>(null.size());
}

std::vector<EmbeddingVector> EmbeddingMemo::embed(std::span<const std::string> texts) {
    std::vector<std::string> missing;
    {
        std::lock_guard lock(mutex_);
        std::set<std::string> queued;
        for (const auto& t : texts)
            if (!memo_.count(t) && queued.insert(t).second) missing.push_back(t);
    }
    if (!missing.empty()) {
        auto fresh = tgraph::embed(inner_, missing);
        std::lock_guard lock(mutex_);
        for (std::size_t i = 0; i < missing.size(); ++i) memo_.emplace(missing[i], std::move(fresh[i]));
    }
    std::lock_guard lock(mutex_);
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) out.push_back(memo_.at(t));
    return out;
}

VocabularyIndex::VocabularyIndex(std::vector<std::string> terms, Embedder& embedder, std::size_t batch)
    : terms_(std::move(terms)) {
    if (terms_.empty()) throw PreconditionError("null vocabulary is empty");
    batch = std::max<std::size_t>(1, batch);
    for (std::size_t i = 0; i < terms_.size(); i += batch) {
        auto n = std::min(batch, terms_.size() - i);
        auto vectors = tgraph::embed(embedder, std::span<const std::string>(terms_).subspan(i, n));
        for (const auto& v : vectors) {
            if (dim_ == 0) dim_ = v.dim;
            if (v.dim != dim_) throw IntegrityError("vocabulary embeddings differ in dimension");
            double sq = 0.0;
            for (double x : v.values) sq += x * x;
            if (sq == 0.0) throw DomainError("zero embedding in vocabulary");
            norms_.push_back(std::sqrt(sq));
            rows_.insert(rows_.end(), v.values.begin(), v.values.end());
        }
    }
}

// Same arithmetic as cosine(), so a vocabulary entry identical to the truth
// ties with it exactly.
std::vector<double> VocabularyIndex::similarities(const EmbeddingVector& v) const {
    if (v.dim != dim_) throw IntegrityError("query embedding dim differs from vocabulary");
    double sq = 0.0;
    for (double x : v.values) sq += x * x;
    if (sq == 0.0) throw DomainError("cosine of a zero vector");
    const double norm = std::sqrt(sq);
    std::vector<double> out(terms_.size());
    for (std::size_t r = 0; r < terms_.size(); ++r) {
        const double* row = rows_.data() + r * dim_;
        double dot = 0.0;
        for (std::size_t k = 0; k < dim_; ++k) dot += v.values[k] * row[k];
        out[r] = std::clamp(dot / (norm * norms_[r]), -1.0, 1.0);
    }
    return out;
}

std::vector<double> null_distribution(const EmbeddingVector& predicted, const VocabularyIndex& vocabulary) {
    return vocabulary.similarities(predicted);
}

std::vector<double> null_distribution(std::string_view predicted, std::span<const std::string> vocabulary,
                                      Embedder& embedder) {
    if (vocabulary.empty()) throw PreconditionError("null vocabulary is empty");
    const std::string p(predicted);
    auto pv = tgraph::embed(embedder, std::span<const std::string>(&p, 1)).front();
    auto vv = tgraph::embed(embedder, vocabulary);
    std::vector<double> out;
    out.reserve(vv.size());
    for (const auto& v : vv) out.push_back(cosine(pv, v));
    return out;
}

std::vector<std::string> null_vocabulary(const std::vector<GeneSetRecord>* dataset, const Ontology* ontology) {
    std::vector<std::string> out;
    std::set<std::string> seen;
    if (dataset && !dataset->empty()) {
        for (const auto& r : *dataset)
            if (r.ground_truth_name && seen.insert(*r.ground_truth_name).second) out.push_back(*r.ground_truth_name);
        return out;
    }
    if (ontology) return bp_term_names(*ontology);
    throw PreconditionError("a null vocabulary needs a dataset or an ontology");
}

Scorer::Scorer(Embedder& embedder, const VocabularyIndex& vocabulary, PercentileRule rule)
    : embedder_(embedder), vocabulary_(vocabulary), rule_(rule) {}

EmbeddingVector Scorer::embed_one(const std::string& t) const {
    return tgraph::embed(embedder_, std::span<const std::string>(&t, 1)).front();
}

GraphScore Scorer::score_graph(const ThoughtGraph& graph, std::string_view truth) const {
    if (!graph.final_answer()) throw PreconditionError("cannot score a graph without a final answer");
    const std::string truth_text = text::trim(truth);
    if (truth_text.empty()) throw PreconditionError("ground-truth term is empty");

    std::vector<std::string> texts{truth_text};
    for (const auto& n : graph.nodes()) texts.push_back(n.term);
    auto vectors = tgraph::embed(embedder_, texts);
    const auto& truth_vec = vectors.front();

    GraphScore s;
    s.gene_set_id = graph.gene_set().id;
    std::map<int, std::pair<double, int>> layer_all, layer_voted;
    bool have_best = false;
    for (std::size_t i = 0; i < graph.nodes().size(); ++i) {
        const auto& node = graph.nodes()[i];
        const auto& vec = vectors[i + 1];
        const double sim = cosine(vec, truth_vec);
        auto& all = layer_all[node.layer];
        all.first += sim;
        ++all.second;
        if (!(node.voted || node.is_final_answer)) continue;

        auto& voted = layer_voted[node.layer];
        voted.first += sim;
        ++voted.second;
        NodeScore ns{sim, percentile(sim, null_distribution(vec, vocabulary_), rule_)};
        s.per_node[node.id] = ns;
        if (!have_best || sim > s.best_score) {
            have_best = true;
            s.best_score = sim;
            s.best_percentile = ns.percentile;
            s.best_node = node.id;
        }
        if (node.is_final_answer) {
            s.predicted_score = sim;
            s.predicted_percentile = ns.percentile;
            s.predicted_node = node.id;
        }
    }
    for (const auto& [layer, acc] : layer_all) s.per_layer_mean[layer] = acc.first / acc.second;
    for (const auto& [layer, acc] : layer_voted) s.per_layer_voted_mean[layer] = acc.first / acc.second;
    return s;
}

TermScore Scorer::score_terms(const std::vector<std::string>& terms, std::string_view truth) const {
    if (terms.empty()) throw PreconditionError("no terms to score");
    const std::string truth_text = text::trim(truth);
    if (truth_text.empty()) throw PreconditionError("ground-truth term is empty");
    TermScore s;
    s.terms = terms;
    auto truth_vec = embed_one(truth_text);
    auto vectors = tgraph::embed(embedder_, terms);
    for (std::size_t i = 0; i < terms.size(); ++i) {
        const double sim = cosine(vectors[i], truth_vec);
        s.similarities.push_back(sim);
        s.percentiles.push_back(percentile(sim, null_distribution(vectors[i], vocabulary_), rule_));
        if (i == 0 || sim > s.best_similarity) {
            s.best_index = i;
            s.best_similarity = sim;
            s.best_percentile = s.percentiles.back();
        }
    }
    return s;
}

EvalReport aggregate(std::span<const double> similarities, std::span<const double> percentiles, std::string method) {
    if (similarities.size() != percentiles.size())
        throw PreconditionError("similarity and percentile lists differ in length");
    EvalReport r;
    r.method = std::move(method);
    r.n_samples = similarities.size();
    if (r.n_samples == 0) return r;
    const double n = static_cast<double>(r.n_samples);
    r.mean_similarity = std::accumulate(similarities.begin(), similarities.end(), 0.0) / n;
    r.mean_percentile = std::accumulate(percentiles.begin(), percentiles.end(), 0.0) / n;
    r.prop_percentile_gt99 =
        static_cast<double>(std::count_if(percentiles.begin(), percentiles.end(), [](double p) { return p > 99.0; })) / n;
    return r;
}

EvalReport aggregate(std::span<const GraphScore> scores, ScoreKind kind, std::string method) {
    std::vector<double> sims, pcts;
    for (const auto& s : scores) {
        sims.push_back(kind == ScoreKind::Predicted ? s.predicted_score : s.best_score);
        pcts.push_back(kind == ScoreKind::Predicted ? s.predicted_percentile : s.best_percentile);
    }
    return aggregate(sims, pcts, std::move(method));
}

EvalReport aggregate(std::span<const TermScore> scores, std::string method) {
    std::vector<double> sims, pcts;
    for (const auto& s : scores) {
        sims.push_back(s.best_similarity);
        pcts.push_back(s.best_percentile);
    }
    return aggregate(sims, pcts, std::move(method));
}

const std::vector<ReferenceRow>& reference_rows() {
    static const std::vector<ReferenceRow> rows = {
        {"GSEA", 24.78, 52.00, 17},
        {"IO zero-shot", 45.75, 77.00, 27},
        {"IO zero-shot-9 (b)", 59.68, 91.42, 61},
        {"IO few-shot", 48.73, 81.85, 32},
        {"CoT", 28.83, 43.71, 0},
        {"Hu et al.", 52.31, 84.44, 43},
        {"Thought Graph (p)", 48.53, 80.90, 42},
        {"Thought Graph (b)", 65.06, 95.05, 65},
    };
    return rows;
}

LayerSummary summarize(std::vector<double> values) {
    LayerSummary s;
    s.n = values.size();
    if (values.empty()) return s;
    std::sort(values.begin(), values.end());
    auto quantile = [&](double q) {
        const double pos = q * static_cast<double>(values.size() - 1);
        const auto lo = static_cast<std::size_t>(std::floor(pos));
        const auto hi = static_cast<std::size_t>(std::ceil(pos));
        return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
    };
    s.mean = std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
    s.median = quantile(0.5);
    s.q1 = quantile(0.25);
    s.q3 = quantile(0.75);
    s.min = values.front();
    s.max = values.back();
    return s;
}

std::map<int, LayerSummary> layer_stats(std::span<const GraphScore> scores, bool voted_only) {
    std::map<int, std::vector<double>> by_layer;
    for (const auto& s : scores)
        for (const auto& [layer, mean] : voted_only ? s.per_layer_voted_mean : s.per_layer_mean)
            by_layer[layer].push_back(mean);
    std::map<int, LayerSummary> out;
    for (auto& [layer, values] : by_layer) out[layer] = summarize(std::move(values));
    return out;
}

std::vector<GeneSetRecord> sample_dataset(std::span<const GeneSetRecord> records, std::size_t n, std::uint64_t seed) {
    if (n >= records.size()) return {records.begin(), records.end()};
    std::vector<std::size_t> idx(records.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < n; ++i) std::swap(idx[i], idx[i + text::uniform_below(rng, idx.size() - i)]);
    std::vector<GeneSetRecord> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(records[idx[i]]);
    return out;
}

// ---- report files ---------------------------------------------------------

namespace {

json row_json(const EvalReport& r) {
    return {{"method", r.method},
            {"mean_similarity", r.mean_similarity},
            {"mean_percentile", r.mean_percentile},
            {"prop_percentile_gt99", r.prop_percentile_gt99},
            {"n_samples", r.n_samples}};
}

json summary_json(const LayerSummary& s) {
    return {{"n", s.n}, {"mean", s.mean}, {"median", s.median}, {"q1", s.q1},
            {"q3", s.q3}, {"min", s.min}, {"max", s.max}};
}

std::string fixed2(double v) {
    std::ostringstream ss;
    ss << std::fixed << std::setprecision(2) << v;
    return ss.str();
}

} // namespace

std::string report_to_json(const CorpusReport& report) {
    json rows = json::array();
    for (const auto& r : report.rows) rows.push_back(row_json(r));
    json refs = json::array();
    for (const auto& r : reference_rows())
        refs.push_back({{"method", r.method},
                        {"similarity_pct", r.similarity_pct},
                        {"percentile_pct", r.percentile_pct},
                        {"percentile_gt99_pct", r.gt99_pct}});

    json graphs = json::array();
    for (const auto& s : report.graph_scores) {
        json nodes = json::object();
        for (const auto& [id, ns] : s.per_node)
            nodes[std::to_string(id.value)] = {{"similarity", ns.similarity}, {"percentile", ns.percentile}};
        json layers = json::object(), voted = json::object();
        for (const auto& [l, m] : s.per_layer_mean) layers[std::to_string(l)] = m;
        for (const auto& [l, m] : s.per_layer_voted_mean) voted[std::to_string(l)] = m;
        graphs.push_back({{"gene_set_id", s.gene_set_id},
                          {"predicted_score", s.predicted_score},
                          {"best_score", s.best_score},
                          {"predicted_percentile", s.predicted_percentile},
                          {"best_percentile", s.best_percentile},
                          {"predicted_node", s.predicted_node.value},
                          {"best_node", s.best_node.value},
                          {"per_node", nodes},
                          {"per_layer_mean", layers},
                          {"per_layer_voted_mean", voted}});
    }
    json terms = json::array();
    for (const auto& s : report.term_scores)
        terms.push_back({{"gene_set_id", s.gene_set_id},
                         {"terms", s.terms},
                         {"similarities", s.similarities},
                         {"percentiles", s.percentiles},
                         {"best_index", s.best_index},
                         {"best_similarity", s.best_similarity},
                         {"best_percentile", s.best_percentile}});

    json doc = {{"schema_version", 1},
                {"rows", rows},
                {"reference_rows", refs},
                {"embedder", report.embedder_tag},
                {"percentile_rule", report.rule == PercentileRule::StrictBelow ? "strict_below" : "midpoint_tie"},
                {"vocabulary_size", report.vocabulary_size}};
    if (!report.graph_scores.empty()) {
        json all = json::object(), voted = json::object();
        for (const auto& [l, s] : layer_stats(report.graph_scores, false)) all[std::to_string(l)] = summary_json(s);
        for (const auto& [l, s] : layer_stats(report.graph_scores, true)) voted[std::to_string(l)] = summary_json(s);
        doc["per_sample"] = graphs;
        doc["layer_stats"] = {{"all_candidates", all}, {"voted", voted}};
    }
    if (!report.term_scores.empty()) doc["per_sample_terms"] = terms;
    return doc.dump(2) + "\n";
}

std::string report_to_tsv(const CorpusReport& report) {
    std::string out = "Method\tSimilarity\tPercentile\tPercentile>99%\n";
    for (const auto& r : report.rows)
        out += r.method + "\t" + fixed2(100.0 * r.mean_similarity) + "\t" + fixed2(r.mean_percentile) + "\t" +
               fixed2(100.0 * r.prop_percentile_gt99) + "\n";
    for (const auto& r : reference_rows())
        out += r.method + " [reference]\t" + fixed2(r.similarity_pct) + "\t" + fixed2(r.percentile_pct) + "\t" +
               fixed2(r.gt99_pct) + "\n";
    return out;
}

std::string layer_stats_to_csv(std::span<const GraphScore> scores) {
    // Shortest text that reads back to the same double.
    auto num = [](double v) {
        char buf[32];
        auto res = std::to_chars(buf, buf + sizeof buf, v);
        return std::string(buf, res.ptr);
    };
    std::string out = "layer,series,n,mean,median,q1,q3,min,max\n";
    for (bool voted : {false, true}) {
        for (const auto& [layer, s] : layer_stats(scores, voted))
            out += std::to_string(layer) + ',' + (voted ? "voted" : "all") + ',' + std::to_string(s.n) + ',' +
                   num(s.mean) + ',' + num(s.median) + ',' + num(s.q1) + ',' + num(s.q3) + ',' + num(s.min) + ',' +
                   num(s.max) + '\n';
    }
    return out;
}

} // namespace tgraph
