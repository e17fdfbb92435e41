#include "scripted_runs.hpp"

#include "thoughtgraph/error.hpp"
#include "thoughtgraph/evaluation.hpp"
#include "thoughtgraph/text.hpp"

#include <doctest.h>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <set>

using namespace tgraph;
using namespace tgraph::testing;

namespace {

// Brute-force oracle: sort, then count the prefix strictly below s.
double oracle_percentile(double s, std::vector<double> null) {
    std::sort(null.begin(), null.end());
    std::size_t below = 0;
    while (below < null.size() && null[below] < s) ++below;
    return 100.0 * static_cast<double>(below) / static_cast<double>(null.size());
}

// Unit vector whose cosine against (1, 0) is c.
std::vector<double> at(double c) { return {c, std::sqrt(1.0 - c * c)}; }

EmbeddingVector ev(std::vector<double> v) {
    auto n = v.size();
    return {std::move(v), n, "test"};
}

GeneSetRecord record(const std::string& id = "GS") {
    GeneSetRecord r;
    r.id = id;
    r.genes = {"A", "B"};
    r.ground_truth_name = "truth";
    return r;
}

// Two layers: A(0.2, voted) B(0.4) / C(0.6) D(0.8).
ThoughtGraph two_layer(bool final_is_d) {
    RunConfig cfg;
    cfg.depth = 2;
    cfg.initial_branch = 2;
    cfg.beam = 1;
    ThoughtGraph g(record(), cfg);
    auto a = g.add_node("A", 1);
    g.add_node("B", 1);
    std::vector<NodeId> voted{a};
    g.mark_voted(voted);
    auto c = g.add_node("C", 2, a);
    auto d = g.add_node("D", 2, a);
    g.add_edge(a, c, Relation::IsA, EdgeSource::ModelLabeled);
    g.add_edge(a, d, Relation::IsA, EdgeSource::ModelLabeled);
    g.set_final_answer(final_is_d ? d : c);
    return g;
}

DictionaryEmbedder two_layer_embedder() {
    return DictionaryEmbedder({{"truth", {1.0, 0.0}},
                               {"A", at(0.2)},
                               {"B", at(0.4)},
                               {"C", at(0.6)},
                               {"D", at(0.8)},
                               {"v1", at(0.1)},
                               {"v2", at(0.5)},
                               {"v3", at(0.9)}});
}

} // namespace

TEST_CASE("cosine examples") {
    std::vector<double> x{1, 0}, y{0, 1}, d{1, 1};
    CHECK(cosine(x, x) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(std::abs(cosine(x, y)) < 1e-12);
    CHECK(std::abs(cosine(x, d) - 0.70710678) < 1e-8);
    std::vector<double> neg{-2, 0};
    CHECK(cosine(x, neg) == doctest::Approx(-1.0));
    std::vector<double> zero{0, 0}, three{1, 2, 3};
    CHECK_THROWS_AS(cosine(x, zero), DomainError);
    CHECK_THROWS_AS(cosine(x, three), IntegrityError);
    CHECK_THROWS_AS(cosine(ev({1, 0}), ev({1, 0, 0})), IntegrityError);
}

TEST_CASE("cosine properties on random vectors") {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<double> u(64), v(64);
        for (auto& a : u) a = g(rng);
        for (auto& a : v) a = g(rng);
        double c = cosine(u, v);
        CHECK(c >= -1.0);
        CHECK(c <= 1.0);
        CHECK(cosine(v, u) == doctest::Approx(c).epsilon(1e-12));
        auto scaled = u;
        for (auto& a : scaled) a *= 3.7;
        CHECK(std::abs(cosine(scaled, v) - c) < 1e-9);
        CHECK(cosine(u, u) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("percentile examples") {
    std::vector<double> null{0.1, 0.2, 0.3, 0.9};
    CHECK(percentile(0.5, null) == 75.0);
    CHECK(percentile(1.0, null) == 100.0);
    CHECK(percentile(0.1, null) == 0.0);
    CHECK(percentile(0.0, null) == 0.0);
    std::vector<double> ties{0.2, 0.5, 0.5, 0.8};
    CHECK(percentile(0.5, ties) == 25.0);
    CHECK(percentile(0.5, ties, PercentileRule::MidpointTie) == 50.0);
    CHECK_THROWS_AS(percentile(0.5, std::vector<double>{}), PreconditionError);
}

TEST_CASE("percentile agrees with a sort-and-count oracle") {
    std::mt19937_64 rng(2024);
    for (int trial = 0; trial < 100; ++trial) {
        const auto n = 1 + static_cast<std::size_t>(rng() % 1000);
        std::vector<double> null(n);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        // Draw from a coarse grid so ties are common.
        for (auto& d : null) d = std::round(u(rng) * 20.0) / 20.0;
        double s = trial % 2 ? null[rng() % n] : std::round(u(rng) * 20.0) / 20.0;
        CHECK(percentile(s, null) == oracle_percentile(s, null));
        double below = oracle_percentile(s, null) * static_cast<double>(n) / 100.0;
        double equal = static_cast<double>(std::count(null.begin(), null.end(), s));
        CHECK(percentile(s, null, PercentileRule::MidpointTie) ==
              doctest::Approx(100.0 * (below + equal / 2.0) / static_cast<double>(n)));
    }
}

TEST_CASE("null distribution") {
    auto emb = two_layer_embedder();
    std::vector<std::string> vocab{"v1", "v2", "v3"};
    auto dist = null_distribution("truth", vocab, emb);
    REQUIRE(dist.size() == 3);
    CHECK(dist[0] == doctest::Approx(0.1));
    CHECK(dist[1] == doctest::Approx(0.5));
    CHECK(dist[2] == doctest::Approx(0.9));

    VocabularyIndex index(vocab, emb);
    CHECK(index.dim() == 2);
    auto v2 = emb.embed(std::vector<std::string>{"v2"}).front();
    auto self = null_distribution(v2, index);
    CHECK(self[1] == doctest::Approx(1.0).epsilon(1e-12));
    // cos(v2, v1) by hand: 0.5*0.1 + sqrt(0.75)*sqrt(0.99)
    CHECK(self[0] == doctest::Approx(0.05 + std::sqrt(0.75 * 0.99)));

    CHECK_THROWS_AS(VocabularyIndex({}, emb), PreconditionError);
    CHECK_THROWS_AS(null_distribution("truth", std::vector<std::string>{}, emb), PreconditionError);
}

TEST_CASE("a vocabulary entry equal to the truth ties with the score exactly") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    std::map<std::string, std::vector<double>> table;
    std::vector<std::string> vocab;
    for (int i = 0; i < 20; ++i) {
        std::vector<double> v(768);
        for (auto& x : v) x = g(rng);
        vocab.push_back("term " + std::to_string(i));
        table[vocab.back()] = v;
    }
    DictionaryEmbedder emb(table);
    VocabularyIndex index(vocab, emb);
    for (int q = 0; q < 20; ++q) {
        auto query = emb.embed(std::vector<std::string>{vocab[static_cast<std::size_t>(q)]}).front();
        auto null = null_distribution(query, index);
        for (std::size_t t = 0; t < vocab.size(); ++t) {
            auto truth = emb.embed(std::vector<std::string>{vocab[t]}).front();
            CHECK(null[t] == cosine(query, truth));
        }
    }
}

TEST_CASE("null vocabulary") {
    std::vector<GeneSetRecord> data{record("1"), record("2")};
    data[1].ground_truth_name = "other";
    CHECK(null_vocabulary(&data, nullptr) == std::vector<std::string>{"truth", "other"});
    auto from_ontology = null_vocabulary(nullptr, &mini_ontology());
    CHECK_FALSE(from_ontology.empty());
    CHECK(std::find(from_ontology.begin(), from_ontology.end(), "DNA repair") != from_ontology.end());
    CHECK_THROWS_AS(null_vocabulary(nullptr, nullptr), PreconditionError);
}

TEST_CASE("graph score on a hand-built graph") {
    auto emb = two_layer_embedder();
    std::vector<std::string> vocab{"v1", "v2", "v3"};
    VocabularyIndex index(vocab, emb);
    Scorer scorer(emb, index);

    auto g = two_layer(true);
    auto s = scorer.score_graph(g, "truth");
    CHECK(s.predicted_score == doctest::Approx(0.8));
    CHECK(s.best_score == doctest::Approx(0.8));
    CHECK(s.per_node.size() == 2);
    CHECK(s.per_layer_mean.at(1) == doctest::Approx((0.2 + 0.4) / 2));
    CHECK(s.per_layer_mean.at(2) == doctest::Approx((0.6 + 0.8) / 2));
    CHECK(s.per_layer_voted_mean.at(1) == doctest::Approx(0.2));
    CHECK(s.per_layer_voted_mean.at(2) == doctest::Approx(0.8));

    auto s2 = scorer.score_graph(two_layer(false), "truth");
    CHECK(s2.predicted_score == doctest::Approx(0.6));
    CHECK(s2.best_score == doctest::Approx(0.6));
    CHECK(s2.best_node == s2.predicted_node);

    // Final answer equal to the truth scores one on both counts.
    DictionaryEmbedder same({{"truth", {1.0, 0.0}}, {"A", at(0.2)}, {"B", at(0.4)}, {"C", at(0.6)}, {"D", {2.0, 0.0}},
                             {"v1", at(0.1)}, {"v2", at(0.5)}, {"v3", at(0.9)}});
    VocabularyIndex index2(vocab, same);
    auto s3 = Scorer(same, index2).score_graph(g, "truth");
    CHECK(s3.predicted_score == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s3.best_score == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(s3.predicted_percentile == 100.0);

    CHECK_THROWS_AS(scorer.score_graph(g, " "), PreconditionError);
    ThoughtGraph unfinished(record(), RunConfig{});
    CHECK_THROWS_AS(scorer.score_graph(unfinished, "truth"), PreconditionError);
}

TEST_CASE("graph score over nine green nodes") {
    auto g = scripted_graph(0, RunConfig{});
    auto green = voted_nodes(g);
    REQUIRE(green.size() == 9);
    std::map<std::string, std::vector<double>> table{{"truth", {1.0, 0.0}}};
    std::map<NodeId, double> sim;
    double step = 0.1;
    for (const auto& node : green) {
        sim[node.id] = step;
        table[node.term] = at(step);
        step += 0.1;
    }
    for (const auto& n : g.nodes())
        if (!sim.count(n.id)) table[n.term] = at(0.05);
    for (int i = 0; i < 4; ++i) table["vocab " + std::to_string(i)] = at(0.2 * i);
    DictionaryEmbedder emb(table);
    std::vector<std::string> vocab{"vocab 0", "vocab 1", "vocab 2", "vocab 3"};
    VocabularyIndex index(vocab, emb);
    auto s = Scorer(emb, index).score_graph(g, "truth");
    CHECK(s.best_score == doctest::Approx(0.9));
    CHECK(s.predicted_score == doctest::Approx(sim.at(*g.final_answer())));
    CHECK(s.best_score >= s.predicted_score);
    CHECK(s.per_node.size() == 9);
    for (const auto& node : green) CHECK(s.per_node.count(node.id) == 1);
    CHECK(s.per_layer_mean.size() == 5);
    CHECK(s.per_layer_voted_mean.size() == 5);
    for (const auto& [id, ns] : s.per_node) {
        CHECK(ns.percentile >= 0.0);
        CHECK(ns.percentile <= 100.0);
    }
}

TEST_CASE("term scores pick the best of the list") {
    auto emb = two_layer_embedder();
    std::vector<std::string> vocab{"v1", "v2", "v3"};
    VocabularyIndex index(vocab, emb);
    Scorer scorer(emb, index);
    auto s = scorer.score_terms({"B", "D", "A", "C"}, "truth");
    CHECK(s.best_index == 1);
    CHECK(s.best_similarity == doctest::Approx(0.8));
    CHECK(s.similarities.size() == 4);
    CHECK(s.percentiles.size() == 4);
    CHECK_THROWS_AS(scorer.score_terms({}, "truth"), PreconditionError);
    CHECK_THROWS_AS(scorer.score_terms({"unknown term"}, "truth"), LookupError);
}

TEST_CASE("aggregate") {
    std::vector<double> sims{0.5, 0.7}, pcts{90, 100};
    auto r = aggregate(sims, pcts, "m");
    CHECK(r.mean_similarity == doctest::Approx(0.6));
    CHECK(r.mean_percentile == doctest::Approx(95.0));
    CHECK(r.prop_percentile_gt99 == doctest::Approx(0.5));
    CHECK(r.n_samples == 2);
    CHECK(r.method == "m");

    std::vector<double> one_s{0.42}, one_p{99.0};
    auto single = aggregate(one_s, one_p);
    CHECK(single.mean_similarity == 0.42);
    CHECK(single.mean_percentile == 99.0);
    CHECK(single.prop_percentile_gt99 == 0.0);  // strictly above 99

    std::vector<double> rs{0.7, 0.5}, rp{100, 90};
    auto swapped = aggregate(rs, rp);
    CHECK(swapped.mean_similarity == doctest::Approx(r.mean_similarity));
    CHECK(swapped.mean_percentile == doctest::Approx(r.mean_percentile));

    std::vector<double> mismatch{1.0};
    CHECK_THROWS_AS(aggregate(sims, mismatch), PreconditionError);

    GraphScore a, b;
    a.predicted_score = 0.5;
    a.best_score = 0.7;
    a.predicted_percentile = 90;
    a.best_percentile = 100;
    b = a;
    b.predicted_score = 0.7;
    std::vector<GraphScore> gs{a, b};
    CHECK(aggregate(gs, ScoreKind::Predicted).mean_similarity == doctest::Approx(0.6));
    CHECK(aggregate(gs, ScoreKind::Best).prop_percentile_gt99 == 1.0);
}

TEST_CASE("reference rows match the published table") {
    const auto& rows = reference_rows();
    REQUIRE(rows.size() == 8);
    auto find = [&](const std::string& m) {
        auto it = std::find_if(rows.begin(), rows.end(), [&](const ReferenceRow& r) { return r.method == m; });
        REQUIRE(it != rows.end());
        return *it;
    };
    auto gsea = find("GSEA");
    CHECK(gsea.similarity_pct == 24.78);
    CHECK(gsea.percentile_pct == 52.00);
    CHECK(gsea.gt99_pct == 17);
    auto tgb = find("Thought Graph (b)");
    CHECK(tgb.similarity_pct == 65.06);
    CHECK(tgb.percentile_pct == 95.05);
    CHECK(tgb.gt99_pct == 65);
    CHECK(find("Thought Graph (p)").similarity_pct == 48.53);
    CHECK(find("IO zero-shot-9 (b)").percentile_pct == 91.42);
}

TEST_CASE("summaries and layer statistics") {
    auto s = summarize({0.4, 0.6});
    CHECK(s.mean == doctest::Approx(0.5));
    CHECK(s.median == doctest::Approx(0.5));
    auto same = summarize({0.3, 0.3, 0.3});
    CHECK(same.q3 - same.q1 == 0.0);
    auto q = summarize({1, 2, 3, 4, 5});
    CHECK(q.q1 == 2.0);
    CHECK(q.median == 3.0);
    CHECK(q.q3 == 4.0);
    auto q4 = summarize({4, 1, 3, 2});
    CHECK(q4.q1 == doctest::Approx(1.75));
    CHECK(q4.q3 == doctest::Approx(3.25));
    CHECK(q4.min == 1.0);
    CHECK(q4.max == 4.0);
    CHECK(summarize({}).n == 0);

    GraphScore a, b;
    for (int l = 1; l <= 5; ++l) {
        a.per_layer_mean[l] = 0.4;
        b.per_layer_mean[l] = 0.6;
        a.per_layer_voted_mean[l] = 0.1;
        b.per_layer_voted_mean[l] = 0.1;
    }
    std::vector<GraphScore> scores{a, b};
    auto stats = layer_stats(scores);
    REQUIRE(stats.size() == 5);
    CHECK(stats.at(3).mean == doctest::Approx(0.5));
    CHECK(stats.at(3).median == doctest::Approx(0.5));
    CHECK(stats.at(3).n == 2);
    auto voted = layer_stats(scores, true);
    CHECK(voted.at(1).q3 - voted.at(1).q1 == 0.0);

    auto csv = layer_stats_to_csv(scores);
    CHECK(csv.starts_with("layer,series,n,mean,median,q1,q3,min,max\n"));
    CHECK(csv.find("3,all,2,0.5,0.5,") != std::string::npos);
    CHECK(csv.find("1,voted,2,0.1,0.1,0.1,0.1,0.1,0.1\n") != std::string::npos);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 11);
}

TEST_CASE("dataset sampling") {
    std::vector<GeneSetRecord> recs;
    for (int i = 0; i < 50; ++i) recs.push_back(record("id" + std::to_string(i)));
    auto a = sample_dataset(recs, 10, 7);
    auto b = sample_dataset(recs, 10, 7);
    REQUIRE(a.size() == 10);
    std::set<std::string> ids;
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].id == b[i].id);
        ids.insert(a[i].id);
    }
    CHECK(ids.size() == 10);
    for (const auto& id : ids) CHECK(id.starts_with("id"));
    CHECK(sample_dataset(recs, 0, 7).empty());
    CHECK(sample_dataset(recs, 80, 7).size() == 50);
    auto c = sample_dataset(recs, 10, 8);
    bool differs = false;
    for (std::size_t i = 0; i < c.size(); ++i) differs |= c[i].id != a[i].id;
    CHECK(differs);
}

TEST_CASE("report formats") {
    CorpusReport rep;
    rep.rows.push_back({"Thought Graph (b)", 0.65061, 95.054, 0.65, 2});
    rep.embedder_tag = "dictionary";
    rep.vocabulary_size = 3;
    auto tsv = report_to_tsv(rep);
    auto lines = text::split(tsv, '\n');
    CHECK(lines[0] == "Method\tSimilarity\tPercentile\tPercentile>99%");
    CHECK(lines[1] == "Thought Graph (b)\t65.06\t95.05\t65.00");
    CHECK(lines[2] == "GSEA [reference]\t24.78\t52.00\t17.00");
    CHECK(std::count(tsv.begin(), tsv.end(), '\n') == 10);

    auto doc = nlohmann::json::parse(report_to_json(rep));
    CHECK(doc.at("embedder") == "dictionary");
    CHECK(doc.at("vocabulary_size") == 3);
    CHECK(doc.at("rows").size() == 1);
    CHECK(doc.at("reference_rows").size() == 8);
    CHECK(doc.at("percentile_rule") == "strict_below");
}
