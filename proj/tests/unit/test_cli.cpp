#include "paths.hpp"
#include "process.hpp"
#include "scripted_runs.hpp"
#include "stub_server.hpp"

#include <doctest.h>
#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <regex>

using namespace tgraph::testing;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

const std::string kCli = TG_CLI;

fs::path fresh(const std::string& name) {
    auto p = fs::temp_directory_path() / ("tg_cli_" + name);
    fs::remove_all(p);
    return p;
}

std::string fx(const std::string& name) { return quoted(fixture(name)); }

// Transcript replay of the fixture gene set; no key in the environment.
std::string replay_generate(const std::string& extra = "") {
    return "env -u OPENAI_API_KEY " + quoted(kCli) + " -q generate --gene-set-id GO:0000724 --dataset " +
           fx("dataset.tsv") + " --transcript " + fx("default_transcript.json") + " --ontology " + fx("mini_go.obo") +
           " " + extra;
}

// Live run against a local stub with a dummy key.
std::string live_generate(const std::string& base_url, const std::string& extra) {
    return "env OPENAI_API_KEY=dummy XDG_CACHE_HOME=" + quoted(fresh("xdg").string()) + " " + quoted(kCli) +
           " -q generate --genes 'TP53 MDM2 CDKN1A' --base-url " + quoted(base_url) + " --canonical " + extra;
}

void write(const fs::path& p, const std::string& body) { std::ofstream(p) << body; }

std::vector<double> layer_populations(const json& graph) {
    std::map<int, double> counts;
    for (const auto& n : graph.at("nodes")) counts[n.at("layer").get<int>()] += 1;
    std::vector<double> out;
    for (auto& [l, c] : counts) out.push_back(c);
    return out;
}

double naive_cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double dot = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        dot += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return dot / std::sqrt(na * nb);
}

} // namespace

TEST_CASE("generate replays the fixture transcript") {
    auto r = run_command(replay_generate("--canonical"));
    REQUIRE_MESSAGE(r.exit_code == 0, r.err);
    auto g = json::parse(r.out);
    CHECK(g.at("nodes").size() == 19);
    CHECK(g.at("edges").size() == 16);
    CHECK(layer_populations(g) == std::vector<double>{3, 4, 4, 4, 4});
    int green = 0;
    int final_layer = 0;
    for (const auto& n : g.at("nodes")) {
        if (n.at("voted").get<bool>() || n.at("final").get<bool>()) ++green;
        if (n.at("final").get<bool>()) final_layer = n.at("layer").get<int>();
    }
    CHECK(green == 9);
    CHECK(final_layer == 5);
    CHECK_FALSE(g.at("provenance").contains("generated_at"));
    CHECK(g.at("provenance").at("provider").get<std::string>().find("default_transcript.json") != std::string::npos);

    auto again = run_command(replay_generate("--canonical"));
    CHECK(again.out == r.out);
}

TEST_CASE("generate writes files and honours SOURCE_DATE_EPOCH") {
    auto dir = fresh("gen");
    fs::create_directories(dir);
    auto out = dir / "g.json";
    auto dot = dir / "g.dot";
    auto r = run_command("SOURCE_DATE_EPOCH=86400 " + replay_generate("--out " + quoted(out.string()) + " --dot " +
                                                                      quoted(dot.string())));
    REQUIRE_MESSAGE(r.exit_code == 0, r.err);
    CHECK(r.out.empty());
    auto g = json::parse(slurp(out));
    CHECK(g.at("provenance").at("generated_at") == "1970-01-02T00:00:00Z");
    auto d = slurp(dot);
    CHECK(d.starts_with("digraph"));
    std::regex edge(R"( -> )");
    CHECK(std::distance(std::sregex_iterator(d.begin(), d.end(), edge), std::sregex_iterator()) == 16);
}

TEST_CASE("missing credentials fail with a config error") {
    auto r = run_command("env -u OPENAI_API_KEY " + quoted(kCli) + " generate --genes 'A B'");
    CHECK(r.exit_code == 1);
    CHECK(r.err.starts_with("error[config]: "));
    CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
}

TEST_CASE("usage errors exit with status 2") {
    CHECK(run_command(quoted(kCli) + " generate --no-such-flag").exit_code == 2);
    CHECK(run_command(quoted(kCli) + " generate").exit_code == 2);
    CHECK(run_command(quoted(kCli) + " generate --gene-set-id GO:1").exit_code == 2);
    CHECK(run_command(quoted(kCli) + " generate --genes A --gene-set-id GO:1").exit_code == 2);
    CHECK(run_command(quoted(kCli) + " export --in " + fx("config.json") + " --format svg").exit_code == 2);
    CHECK(run_command(quoted(kCli)).exit_code == 2);
    auto v = run_command(quoted(kCli) + " --version");
    CHECK(v.exit_code == 0);
    CHECK_FALSE(v.out.empty());
}

TEST_CASE("evaluate matches an independent recomputation") {
    auto dir = fresh("eval");
    auto graphs = dir / "graphs";
    auto report_path = dir / "report.json";
    auto tsv = dir / "table.tsv";
    auto layers = dir / "layers.csv";
    auto r = run_command("env -u OPENAI_API_KEY " + quoted(kCli) + " -q evaluate --dataset " + fx("dataset.tsv") +
                         " --sample 2 --seed 0 --transcript " + fx("default_transcript.json") + " --ontology " +
                         fx("mini_go.obo") + " --embedder dictionary " + fx("embeddings.json") + " --save-graphs " +
                         quoted(graphs.string()) + " --out " + quoted(report_path.string()) + " --tsv " +
                         quoted(tsv.string()) + " --layers-out " + quoted(layers.string()));
    REQUIRE_MESSAGE(r.exit_code == 0, r.err);
    auto report = json::parse(slurp(report_path));

    // Oracle: raw dictionary vectors, naive cosine, sort-free counting.
    auto dict = json::parse(slurp(fixture("embeddings.json"))).at("vectors");
    auto vec = [&](const std::string& term) { return dict.at(term).get<std::vector<double>>(); };
    std::map<std::string, std::string> truth;
    std::vector<std::string> vocabulary;
    {
        std::ifstream in(fixture("dataset.tsv"));
        std::string line;
        std::getline(in, line);
        while (std::getline(in, line)) {
            auto a = line.find('\t'), b = line.find('\t', a + 1);
            truth[line.substr(0, a)] = line.substr(a + 1, b - a - 1);
            vocabulary.push_back(line.substr(a + 1, b - a - 1));
        }
    }
    std::vector<std::string> sampled;
    for (const auto& s : report.at("per_sample")) sampled.push_back(s.at("gene_set_id"));
    REQUIRE(sampled.size() == 2);

    double p_sim = 0, b_sim = 0, p_pct = 0, b_pct = 0;
    int p_gt99 = 0, b_gt99 = 0;
    for (const auto& id : sampled) {
        std::string file = id;
        std::replace(file.begin(), file.end(), ':', '_');
        auto g = json::parse(slurp(graphs / (file + ".json")));
        auto t = vec(truth.at(id));
        double best = -2, best_pct = 0, pred = 0, pred_pct = 0;
        for (const auto& n : g.at("nodes")) {
            if (!n.at("voted").get<bool>() && !n.at("final").get<bool>()) continue;
            auto v = vec(n.at("term"));
            double s = naive_cosine(v, t);
            int below = 0;
            for (const auto& w : vocabulary) below += naive_cosine(v, vec(w)) < s;
            double pct = 100.0 * below / static_cast<double>(vocabulary.size());
            if (s > best) {
                best = s;
                best_pct = pct;
            }
            if (n.at("final").get<bool>()) {
                pred = s;
                pred_pct = pct;
            }
        }
        p_sim += pred / 2;
        b_sim += best / 2;
        p_pct += pred_pct / 2;
        b_pct += best_pct / 2;
        p_gt99 += pred_pct > 99;
        b_gt99 += best_pct > 99;
    }
    const auto& rows = report.at("rows");
    REQUIRE(rows.size() == 2);
    CHECK(rows[0].at("method") == "Thought Graph (p)");
    CHECK(rows[0].at("mean_similarity").get<double>() == doctest::Approx(p_sim).epsilon(1e-9));
    CHECK(rows[0].at("mean_percentile").get<double>() == doctest::Approx(p_pct).epsilon(1e-9));
    CHECK(rows[0].at("prop_percentile_gt99").get<double>() == p_gt99 / 2.0);
    CHECK(rows[1].at("method") == "Thought Graph (b)");
    CHECK(rows[1].at("mean_similarity").get<double>() == doctest::Approx(b_sim).epsilon(1e-9));
    CHECK(rows[1].at("mean_percentile").get<double>() == doctest::Approx(b_pct).epsilon(1e-9));
    CHECK(rows[1].at("prop_percentile_gt99").get<double>() == b_gt99 / 2.0);
    CHECK(report.at("vocabulary_size") == 3);

    CHECK(slurp(tsv).starts_with("Method\tSimilarity\tPercentile\tPercentile>99%\nThought Graph (p)\t"));
    CHECK(slurp(layers).starts_with("layer,series,n,mean,median,q1,q3,min,max\n1,all,2,"));

    // Scoring saved graphs needs no model at all.
    auto rescored = run_command("env -u OPENAI_API_KEY " + quoted(kCli) + " -q evaluate --dataset " +
                                fx("dataset.tsv") + " --sample 2 --seed 0 --graphs " + quoted(graphs.string()) +
                                " --embedder dictionary " + fx("embeddings.json"));
    REQUIRE_MESSAGE(rescored.exit_code == 0, rescored.err);
    CHECK(json::parse(rescored.out).at("rows") == rows);
}

TEST_CASE("baselines replay from the transcript") {
    for (std::string method : {"io-zero-shot", "io-zero-shot-9", "few-shot", "cot"}) {
        CAPTURE(method);
        auto r = run_command("env -u OPENAI_API_KEY " + quoted(kCli) + " -q baseline --method " + method +
                             " --exemplars " + fx("exemplars.tsv") + " --dataset " + fx("dataset.tsv") +
                             " --transcript " + fx("default_transcript.json") + " --ontology " + fx("mini_go.obo") +
                             " --embedder dictionary " + fx("embeddings.json"));
        REQUIRE_MESSAGE(r.exit_code == 0, r.err);
        auto doc = json::parse(r.out);
        CHECK(doc.at("rows").size() == 1);
        CHECK(doc.at("rows")[0].at("n_samples") == 3);
        for (const auto& s : doc.at("per_sample_terms"))
            CHECK(s.at("terms").size() == (method == "io-zero-shot-9" ? 9u : 1u));
    }
    auto bad = run_command(quoted(kCli) + " baseline --method tot --dataset " + fx("dataset.tsv") +
                           " --embedder dictionary " + fx("embeddings.json") + " --transcript " +
                           fx("default_transcript.json"));
    CHECK(bad.exit_code == 1);
    CHECK(bad.err.starts_with("error[config]"));
}

TEST_CASE("ontology index round trip through the CLI") {
    auto dir = fresh("onto");
    fs::create_directories(dir);
    auto index = dir / "index.json";
    auto r = run_command(quoted(kCli) + " -q ontology index --obo " + fx("mini_go.obo") + " --out " +
                         quoted(index.string()));
    REQUIRE_MESSAGE(r.exit_code == 0, r.err);
    auto doc = json::parse(slurp(index));
    CHECK(doc.at("terms").size() == 50);

    auto from_obo = run_command(replay_generate("--canonical"));
    auto from_index = run_command("env -u OPENAI_API_KEY " + quoted(kCli) +
                                  " -q generate --gene-set-id GO:0000724 --dataset " + fx("dataset.tsv") +
                                  " --transcript " + fx("default_transcript.json") + " --ontology " +
                                  quoted(index.string()) + " --canonical");
    REQUIRE(from_index.exit_code == 0);
    CHECK(from_index.out == from_obo.out);
}

TEST_CASE("export converts graph files") {
    auto dir = fresh("export");
    fs::create_directories(dir);
    auto graph = dir / "g.json";
    REQUIRE(run_command(replay_generate("--canonical --out " + quoted(graph.string()))).exit_code == 0);
    auto dot = run_command(quoted(kCli) + " export --in " + quoted(graph.string()) + " --format dot");
    REQUIRE(dot.exit_code == 0);
    CHECK(dot.out.starts_with("digraph"));
    auto same = run_command(quoted(kCli) + " export --in " + quoted(graph.string()) + " --format json");
    REQUIRE(same.exit_code == 0);
    CHECK(json::parse(same.out) == json::parse(slurp(graph)));

    auto bad = dir / "bad.json";
    write(bad, "{\"nodes\": []}");
    auto r = run_command(quoted(kCli) + " export --in " + quoted(bad.string()) + " --format dot");
    CHECK(r.exit_code == 1);
    CHECK(r.err.starts_with("error["));
}

TEST_CASE("configuration precedence: flag over file over default") {
    ChatStub stub([](const std::string& user) { return cooperative_reply(user); });
    auto dir = fresh("prec");
    fs::create_directories(dir);
    auto cfg = dir / "cfg.json";
    write(cfg, R"({"depth": 3, "beam": 1, "temperature": 0.1})");

    auto depth_of = [](const ProcessResult& r) {
        REQUIRE_MESSAGE(r.exit_code == 0, r.err);
        return json::parse(r.out).at("config");
    };
    auto plain = depth_of(run_command(live_generate(stub.base_url(), "--no-cache")));
    CHECK(plain.at("depth") == 5);
    CHECK(plain.at("beam") == 2);
    auto filed = depth_of(run_command(live_generate(stub.base_url(), "--no-cache --config " + quoted(cfg.string()))));
    CHECK(filed.at("depth") == 3);
    CHECK(filed.at("beam") == 1);
    CHECK(filed.at("temperature") == 0.1);
    auto flagged = depth_of(run_command(
        live_generate(stub.base_url(), "--no-cache --config " + quoted(cfg.string()) + " --depth 4 --temperature 0.3")));
    CHECK(flagged.at("depth") == 4);
    CHECK(flagged.at("beam") == 1);
    CHECK(flagged.at("temperature") == 0.3);

    auto invalid = run_command(live_generate(stub.base_url(), "--no-cache --depth 1"));
    CHECK(invalid.exit_code == 1);
    CHECK(invalid.err.starts_with("error[config]"));
}

TEST_CASE("a cached live run replays with the provider unreachable") {
    ChatStub stub([](const std::string& user) { return cooperative_reply(user); });
    auto cache = fresh("cache");
    auto transcript = fresh("rec") / "t.json";
    fs::create_directories(transcript.parent_path());
    auto first = run_command(live_generate(stub.base_url(), "--cache-dir " + quoted(cache.string()) +
                                                                " --record-transcript " + quoted(transcript.string())));
    REQUIRE_MESSAGE(first.exit_code == 0, first.err);
    const int hits = stub.hits();
    // No ontology: one initial call, four votes, eight expansions, sixteen
    // edge labels and the final choice.
    CHECK(hits == 30);

    auto replay = run_command(live_generate("http://127.0.0.1:9/v1", "--cache-dir " + quoted(cache.string())));
    REQUIRE_MESSAGE(replay.exit_code == 0, replay.err);
    CHECK(stub.hits() == hits);
    auto a = json::parse(first.out), b = json::parse(replay.out);
    CHECK(a.at("nodes") == b.at("nodes"));
    CHECK(a.at("edges") == b.at("edges"));
    CHECK(a.at("provenance").at("exchange_digest") == b.at("provenance").at("exchange_digest"));

    auto from_transcript = run_command("env -u OPENAI_API_KEY " + quoted(kCli) +
                                       " -q generate --genes 'TP53 MDM2 CDKN1A' --canonical --transcript " +
                                       quoted(transcript.string()));
    REQUIRE_MESSAGE(from_transcript.exit_code == 0, from_transcript.err);
    CHECK(json::parse(from_transcript.out).at("nodes") == a.at("nodes"));
    CHECK(stub.hits() == hits);
}
