// thoughtgraph: generate, evaluate and export thought graphs from the shell.

#include "thoughtgraph/baselines.hpp"
#include "thoughtgraph/config.hpp"
#include "thoughtgraph/dataset.hpp"
#include "thoughtgraph/engine.hpp"
#include "thoughtgraph/error.hpp"
#include "thoughtgraph/evaluation.hpp"
#include "thoughtgraph/llm_gateway.hpp"
#include "thoughtgraph/log.hpp"
#include "thoughtgraph/ontology.hpp"
#include "thoughtgraph/prompts.hpp"
#include "thoughtgraph/text.hpp"
#include "thoughtgraph/thought_graph.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <future>
#include <iostream>
#include <random>
#include <thread>

namespace fs = std::filesystem;
using namespace tgraph;

namespace {

constexpr unsigned kLiveWorkerCap = 4;
constexpr const char* kDefaultBaseUrl = "https://api.openai.com/v1";

std::string env(const char* name) {
    const char* v = std::getenv(name);
    return v ? v : "";
}

// ISO-8601 UTC. SOURCE_DATE_EPOCH pins it for reproducible output.
std::string utc_now() {
    std::time_t t = std::time(nullptr);
    if (auto pinned = env("SOURCE_DATE_EPOCH"); !pinned.empty()) {
        try {
            t = static_cast<std::time_t>(std::stoll(pinned));
        } catch (const std::exception&) {
            throw ConfigError("SOURCE_DATE_EPOCH is not an integer: " + pinned);
        }
    }
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

// Error reports are a single line.
std::string one_line(std::string s) {
    std::replace(s.begin(), s.end(), '\n', ' ');
    std::replace(s.begin(), s.end(), '\r', ' ');
    return s;
}

void write_output(const std::string& path, const std::string& content) {
    if (path.empty() || path == "-") {
        std::cout << content;
        return;
    }
    if (auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
    text::write_file_atomic(path, content);
}

// ---- option groups ----------------------------------------------------------

struct RunOptions {
    std::string config_file;
    std::optional<int> depth, beam, k_init, k_sub, max_tokens;
    std::optional<double> temperature;
    std::optional<std::string> model;
    std::optional<std::uint64_t> seed;
    std::string transcript;
    std::string record_transcript;
    std::string cache_dir;
    bool no_cache = false;
    std::string base_url;
    std::string ontology;
    std::string templates;

    void add(CLI::App& cmd) {
        cmd.add_option("--config", config_file, "RunConfig JSON file")->check(CLI::ExistingFile);
        cmd.add_option("--depth", depth, "Number of layers");
        cmd.add_option("--beam", beam, "Nodes kept per layer");
        cmd.add_option("--k-init", k_init, "Terms in the first layer");
        cmd.add_option("--k-sub", k_sub, "Children per expanded node");
        cmd.add_option("--temperature", temperature, "Sampling temperature");
        cmd.add_option("--model", model, "Chat model name");
        cmd.add_option("--max-tokens", max_tokens, "Completion token limit");
        cmd.add_option("--seed", seed, "Seed for sampling and example selection");
        cmd.add_option("--transcript", transcript, "Replay model replies from a recorded transcript")
            ->check(CLI::ExistingFile);
        cmd.add_option("--record-transcript", record_transcript, "Write every exchange of this run to a transcript");
        cmd.add_option("--cache-dir", cache_dir, "Response cache directory");
        cmd.add_flag("--no-cache", no_cache, "Bypass the response cache");
        cmd.add_option("--base-url", base_url, "Chat API base URL (default: $OPENAI_BASE_URL)");
        cmd.add_option("--ontology", ontology, "GO ontology (.obo or index JSON) for edge grounding")
            ->check(CLI::ExistingFile);
        cmd.add_option("--templates", templates, "Directory of prompt template overrides")
            ->check(CLI::ExistingDirectory);
    }

    // Flag > config file > built-in default.
    RunConfig config() const {
        RunConfig cfg;
        if (!config_file.empty()) {
            auto j = nlohmann::json::parse(text::read_file(config_file), nullptr, false);
            if (j.is_discarded() || !j.is_object()) throw ConfigError(config_file + " is not a JSON object");
            cfg = config_from_json(j, cfg);
        }
        if (depth) cfg.depth = *depth;
        if (beam) cfg.beam = *beam;
        if (k_init) cfg.initial_branch = *k_init;
        if (k_sub) cfg.branch = *k_sub;
        if (temperature) cfg.temperature = *temperature;
        if (model) cfg.model = *model;
        if (max_tokens) cfg.max_tokens = *max_tokens;
        if (seed) cfg.seed = *seed;
        validate(cfg);
        return cfg;
    }

    bool live() const { return transcript.empty(); }
};

// Owns the chain of chat clients: provider, optional cache, optional recorder.
class ChatStack {
public:
    explicit ChatStack(const RunOptions& opt) {
        if (!opt.transcript.empty()) {
            provider_ = std::make_unique<TranscriptChat>(load_transcript(opt.transcript),
                                                     fs::path(opt.transcript).filename().string());
        } else {
            auto key = env("OPENAI_API_KEY");
            if (key.empty())
                throw ConfigError("OPENAI_API_KEY is not set; pass --transcript FILE to run from a recording");
            auto base = !opt.base_url.empty() ? opt.base_url : env("OPENAI_BASE_URL");
            if (base.empty()) base = kDefaultBaseUrl;
            provider_ = std::make_unique<HttpChat>(base, key);
        }
        ChatClient* top = provider_.get();

        // Live runs cache by default; replays only when a directory is named.
        std::string dir = opt.cache_dir;
        if (dir.empty() && opt.live()) {
            auto xdg = env("XDG_CACHE_HOME");
            auto home = env("HOME");
            if (!xdg.empty()) dir = (fs::path(xdg) / "thoughtgraph").string();
            else if (!home.empty()) dir = (fs::path(home) / ".cache" / "thoughtgraph").string();
        }
        if (!opt.no_cache && !dir.empty()) {
            cached_ = std::make_unique<CachedChat>(*top, ResponseCache(dir));
            top = cached_.get();
        }
        if (!opt.record_transcript.empty()) {
            recorder_ = std::make_unique<RecordingChat>(*top);
            top = recorder_.get();
        }
        top_ = top;
    }

    ChatClient& client() { return *top_; }

    void finish(const RunOptions& opt) const {
        if (recorder_) write_output(opt.record_transcript, transcript_to_json(recorder_->transcript()));
    }

private:
    std::unique_ptr<ChatClient> provider_;
    std::unique_ptr<CachedChat> cached_;
    std::unique_ptr<RecordingChat> recorder_;
    ChatClient* top_ = nullptr;
};

Ontology load_ontology_opt(const std::string& path) {
    if (path.empty()) {
        log::info("no --ontology given; every edge will be labeled by the model");
        return {};
    }
    return load_ontology(path);
}

PromptSet load_prompts(const std::string& dir) {
    return dir.empty() ? PromptSet::defaults() : PromptSet::from_directory(dir);
}

struct EvalOptions {
    std::string dataset;
    std::optional<std::size_t> sample;
    std::vector<std::string> embedder;
    std::string out;
    std::string layers_out;
    std::string tsv;
    std::string graphs;
    std::string save_graphs;
    std::optional<unsigned> workers;
    bool midpoint_ties = false;

    void add(CLI::App& cmd) {
        cmd.add_option("--dataset", dataset, "Gene set TSV")->required()->check(CLI::ExistingFile);
        cmd.add_option("--sample", sample, "Evaluate a seeded random sample of this size");
        cmd.add_option("--embedder", embedder, "Embedding source: url URL | vectors-file FILE | dictionary FILE")
            ->expected(2)
            ->required();
        cmd.add_option("--out", out, "Report JSON path (default: stdout)");
        cmd.add_option("--tsv", tsv, "Results table TSV path");
        cmd.add_option("--graphs", graphs, "Directory of pre-computed graphs (<id>.json, ':' written as '_')");
        cmd.add_option("--save-graphs", save_graphs, "Write every graph used to this directory");
        cmd.add_option("--workers", workers, "Parallel samples (default: hardware threads)");
        cmd.add_flag("--midpoint-ties", midpoint_ties, "Count null ties as half below");
    }

    std::unique_ptr<Embedder> make_embedder() const {
        const auto& kind = embedder.at(0);
        const auto& where = embedder.at(1);
        if (kind == "url") return std::make_unique<HttpEmbedder>(where);
        if (kind == "vectors-file") return load_vectors_file(where);
        if (kind == "dictionary") return load_dictionary_embedder(where);
        throw ConfigError("unknown embedder kind '" + kind + "' (expected url, vectors-file or dictionary)");
    }
};

std::string graph_file_name(const std::string& id) {
    std::string name = id;
    std::replace(name.begin(), name.end(), ':', '_');
    std::replace(name.begin(), name.end(), '/', '_');
    return name + ".json";
}

// Runs fn(i) for i in [0, n) on up to `workers` threads. The first failure is
// rethrown after every worker has stopped.
template <typename Fn>
void parallel_for(std::size_t n, unsigned workers, Fn&& fn) {
    workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
    std::atomic<std::size_t> next{0};
    std::atomic<bool> failed{false};
    std::exception_ptr error;
    std::mutex error_mutex;
    auto worker = [&] {
        for (std::size_t i; !failed && (i = next++) < n;) {
            try {
                fn(i);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                if (!error) error = std::current_exception();
                failed = true;
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

unsigned worker_count(const EvalOptions& eo, const RunOptions& ro) {
    unsigned n = eo.workers.value_or(std::max(1u, std::thread::hardware_concurrency()));
    if (n == 0) throw ConfigError("--workers must be at least 1");
    bool live = ro.live() || eo.embedder.at(0) == "url";
    if (live && n > kLiveWorkerCap) {
        log::info("capping workers at " + std::to_string(kLiveWorkerCap) + " for live providers");
        n = kLiveWorkerCap;
    }
    return n;
}

// The sampled records and the shared evaluation machinery.
struct Corpus {
    std::vector<GeneSetRecord> all;
    std::vector<GeneSetRecord> records;
    std::unique_ptr<Embedder> raw_embedder;
    std::unique_ptr<EmbeddingMemo> embedder;
    std::unique_ptr<VocabularyIndex> vocabulary;
    PercentileRule rule = PercentileRule::StrictBelow;

    Corpus(const EvalOptions& eo, std::uint64_t seed) {
        all = ingest_dataset(eo.dataset);
        if (all.empty()) throw PreconditionError("dataset " + eo.dataset + " has no rows");
        records = eo.sample ? sample_dataset(all, *eo.sample, seed) : all;
        for (const auto& r : records)
            if (!r.ground_truth_name || text::trim(*r.ground_truth_name).empty())
                throw PreconditionError("gene set " + r.id + " has no ground-truth name");
        raw_embedder = eo.make_embedder();
        embedder = std::make_unique<EmbeddingMemo>(*raw_embedder);
        vocabulary = std::make_unique<VocabularyIndex>(null_vocabulary(&all, nullptr), *embedder);
        rule = eo.midpoint_ties ? PercentileRule::MidpointTie : PercentileRule::StrictBelow;
    }
};

// Loads a stored graph for the record, or generates one.
ThoughtGraph obtain_graph(const GeneSetRecord& record, const EvalOptions& eo, const ThoughtGraphEngine* engine,
                          const RunConfig& cfg) {
    if (!eo.graphs.empty()) {
        auto path = fs::path(eo.graphs) / graph_file_name(record.id);
        if (fs::exists(path)) {
            auto g = graph_from_json(text::read_file(path.string()));
            if (g.gene_set().genes != record.genes)
                throw IntegrityError(path.string() + " holds a graph for a different gene set");
            return g;
        }
        if (!engine) throw LookupError("no graph for " + record.id + " in " + eo.graphs);
    }
    if (!engine) throw PreconditionError("no graph source for " + record.id);
    auto g = engine->run(record, cfg, utc_now);
    if (!eo.save_graphs.empty())
        write_output((fs::path(eo.save_graphs) / graph_file_name(record.id)).string(), graph_to_json(g, true));
    return g;
}

void write_reports(const EvalOptions& eo, CorpusReport& report, const Corpus& corpus) {
    report.embedder_tag = corpus.embedder->model_tag();
    report.rule = corpus.rule;
    report.vocabulary_size = corpus.vocabulary->terms().size();
    write_output(eo.out, report_to_json(report));
    if (!eo.tsv.empty()) write_output(eo.tsv, report_to_tsv(report));
}

// ---- subcommands ----------------------------------------------------------

struct GenerateCmd {
    RunOptions run;
    std::string genes;
    std::string gene_set_id;
    std::string dataset;
    std::string out;
    std::string dot;
    bool canonical = false;

    void add(CLI::App& app) {
        auto* cmd = app.add_subcommand("generate", "Build a thought graph for one gene set");
        auto* g = cmd->add_option("--genes", genes, "Comma- or space-separated gene symbols");
        auto* id = cmd->add_option("--gene-set-id", gene_set_id, "Gene set id to look up in --dataset");
        g->excludes(id);
        cmd->add_option("--dataset", dataset, "Gene set TSV")->check(CLI::ExistingFile);
        cmd->add_option("--out", out, "Graph JSON path (default: stdout)");
        cmd->add_option("--dot", dot, "Also write Graphviz DOT here");
        cmd->add_flag("--canonical", canonical, "Omit the generation timestamp");
        run.add(*cmd);
        cmd->callback([this] { execute(); });
    }

    GeneSetRecord record() const {
        if (!genes.empty()) {
            GeneSetRecord r;
            r.genes = parse_gene_list(genes);
            r.id = "genes:" + text::sha256_hex(text::join(r.genes, ",")).substr(0, 12);
            return r;
        }
        if (gene_set_id.empty()) throw CLI::ValidationError("generate needs --genes or --gene-set-id");
        if (dataset.empty()) throw CLI::ValidationError("--gene-set-id needs --dataset");
        auto records = ingest_dataset(dataset);
        const auto* r = find_record(records, gene_set_id);
        if (!r) throw LookupError("gene set " + gene_set_id + " not found in " + dataset);
        return *r;
    }

    void execute() const {
        auto cfg = run.config();
        auto rec = record();
        ChatStack chat(run);
        auto ontology = load_ontology_opt(run.ontology);
        ThoughtGraphEngine engine(chat.client(), ontology, load_prompts(run.templates));
        auto graph = engine.run(rec, cfg, utc_now);
        chat.finish(run);
        write_output(out, graph_to_json(graph, !canonical));
        if (!dot.empty()) write_output(dot, graph_to_dot(graph));
        log::info("graph for " + rec.id + ": " + std::to_string(graph.nodes().size()) + " nodes, " +
                  std::to_string(graph.provenance().chat_calls) + " chat calls");
    }
};

struct EvaluateCmd {
    RunOptions run;
    EvalOptions eval;

    void add(CLI::App& app) {
        auto* cmd = app.add_subcommand("evaluate", "Score thought graphs against ground-truth names");
        eval.add(*cmd);
        cmd->add_option("--layers-out", eval.layers_out, "Per-layer similarity CSV path");
        run.add(*cmd);
        cmd->callback([this] { execute(); });
    }

    void execute() const {
        auto cfg = run.config();
        Corpus corpus(eval, cfg.seed);
        Scorer scorer(*corpus.embedder, *corpus.vocabulary, corpus.rule);

        // Live clients are only built when some graph must be generated.
        bool need_engine = eval.graphs.empty() || std::any_of(corpus.records.begin(), corpus.records.end(), [&](auto& r) {
                               return !fs::exists(fs::path(eval.graphs) / graph_file_name(r.id));
                           });
        std::unique_ptr<ChatStack> chat;
        Ontology ontology;
        std::unique_ptr<ThoughtGraphEngine> engine;
        if (need_engine) {
            chat = std::make_unique<ChatStack>(run);
            ontology = load_ontology_opt(run.ontology);
            engine = std::make_unique<ThoughtGraphEngine>(chat->client(), ontology, load_prompts(run.templates));
        }

        CorpusReport report;
        report.graph_scores.resize(corpus.records.size());
        parallel_for(corpus.records.size(), worker_count(eval, run), [&](std::size_t i) {
            const auto& rec = corpus.records[i];
            auto graph = obtain_graph(rec, eval, engine.get(), cfg);
            report.graph_scores[i] = scorer.score_graph(graph, *rec.ground_truth_name);
            report.graph_scores[i].gene_set_id = rec.id;
        });
        if (chat) chat->finish(run);

        report.rows.push_back(aggregate(report.graph_scores, ScoreKind::Predicted, "Thought Graph (p)"));
        report.rows.push_back(aggregate(report.graph_scores, ScoreKind::Best, "Thought Graph (b)"));
        write_reports(eval, report, corpus);
        if (!eval.layers_out.empty()) write_output(eval.layers_out, layer_stats_to_csv(report.graph_scores));
    }
};

struct BaselineCmd {
    RunOptions run;
    EvalOptions eval;
    std::string method;
    std::string exemplars;

    void add(CLI::App& app) {
        auto* cmd = app.add_subcommand("baseline", "Run and score a prompting baseline");
        cmd->add_option("--method", method, "io-zero-shot | io-zero-shot-9 | few-shot | cot")->required();
        cmd->add_option("--exemplars", exemplars, "Exemplar TSV for few-shot")->check(CLI::ExistingFile);
        eval.add(*cmd);
        run.add(*cmd);
        cmd->callback([this] { execute(); });
    }

    // Five exemplars that do not leak the record; chosen by seed when the
    // pool is larger.
    std::vector<Exemplar> pick_exemplars(const std::vector<Exemplar>& pool, const GeneSetRecord& rec,
                                         std::uint64_t seed) const {
        if (pool.size() == kFewShotExemplars) return pool;
        std::vector<Exemplar> eligible;
        for (const auto& e : pool) {
            bool leak = (e.id && *e.id == rec.id) || e.genes == rec.genes;
            if (!leak) eligible.push_back(e);
        }
        if (eligible.size() <= kFewShotExemplars) return eligible;
        std::mt19937_64 rng(seed);
        for (std::size_t i = 0; i < kFewShotExemplars; ++i) {
            auto j = i + static_cast<std::size_t>(text::uniform_below(rng, eligible.size() - i));
            std::swap(eligible[i], eligible[j]);
        }
        eligible.resize(kFewShotExemplars);
        return eligible;
    }

    void execute() const {
        auto kind = baseline_from_name(method);
        if (!kind) throw ConfigError("unknown --method '" + method + "'");
        if (*kind == BaselineKind::FewShot && exemplars.empty()) throw ConfigError("few-shot needs --exemplars FILE");
        auto cfg = run.config();
        Corpus corpus(eval, cfg.seed);
        Scorer scorer(*corpus.embedder, *corpus.vocabulary, corpus.rule);
        std::vector<Exemplar> pool;
        if (*kind == BaselineKind::FewShot) pool = load_exemplars(exemplars);

        auto prompts = load_prompts(run.templates);
        ChatStack chat(run);
        Ontology ontology;
        if (*kind == BaselineKind::CoT) ontology = load_ontology_opt(run.ontology);
        ThoughtGraphEngine engine(chat.client(), ontology, prompts);
        BaselineRunner runner(chat.client(), prompts);

        CorpusReport report;
        report.term_scores.resize(corpus.records.size());
        parallel_for(corpus.records.size(), worker_count(eval, run), [&](std::size_t i) {
            const auto& rec = corpus.records[i];
            std::vector<std::string> terms;
            switch (*kind) {
            case BaselineKind::IoZeroShot: terms = {runner.io_zero_shot(rec, cfg)}; break;
            case BaselineKind::IoZeroShot9: terms = runner.io_zero_shot_9(rec, cfg); break;
            case BaselineKind::FewShot: terms = {runner.few_shot(rec, pick_exemplars(pool, rec, cfg.seed), cfg)}; break;
            case BaselineKind::CoT: terms = {runner.cot(rec, obtain_graph(rec, eval, &engine, cfg), cfg)}; break;
            }
            report.term_scores[i] = scorer.score_terms(terms, *rec.ground_truth_name);
            report.term_scores[i].gene_set_id = rec.id;
        });
        chat.finish(run);

        report.rows.push_back(aggregate(report.term_scores, std::string(baseline_label(*kind))));
        write_reports(eval, report, corpus);
    }
};

struct OntologyCmd {
    std::string obo;
    std::string out;

    void add(CLI::App& app) {
        auto* cmd = app.add_subcommand("ontology", "Ontology utilities");
        auto* index = cmd->add_subcommand("index", "Parse an OBO file into an index JSON");
        index->add_option("--obo", obo, "GO .obo file")->required()->check(CLI::ExistingFile);
        index->add_option("--out", out, "Index path (default: stdout)");
        index->callback([this] { execute(); });
        cmd->require_subcommand(1);
    }

    void execute() const {
        auto ont = parse_obo_file(obo);
        write_output(out, ontology_to_json(ont));
        log::info("indexed " + std::to_string(ont.size()) + " terms, " + std::to_string(ont.diagnostics().size()) +
                  " diagnostics");
    }
};

struct ExportCmd {
    std::string in;
    std::string format = "dot";
    std::string out;

    void add(CLI::App& app) {
        auto* cmd = app.add_subcommand("export", "Convert a graph JSON file");
        cmd->add_option("--in", in, "Graph JSON")->required()->check(CLI::ExistingFile);
        cmd->add_option("--format", format, "dot | json")->check(CLI::IsMember({"dot", "json"}));
        cmd->add_option("--out", out, "Output path (default: stdout)");
        cmd->callback([this] { execute(); });
    }

    void execute() const {
        auto graph = graph_from_json(text::read_file(in));
        write_output(out, format == "dot" ? graph_to_dot(graph) : graph_to_json(graph));
    }
};

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Thought-graph gene set annotation"};
    app.require_subcommand(1);
    app.fallthrough();
    app.set_version_flag("--version", "thoughtgraph 0.1.0");
    bool verbose = false, quiet = false;
    app.add_flag("-v,--verbose", verbose, "Debug logging");
    app.add_flag("-q,--quiet", quiet, "Warnings only");

    GenerateCmd generate;
    EvaluateCmd evaluate;
    BaselineCmd baseline;
    OntologyCmd ontology;
    ExportCmd exporter;
    generate.add(app);
    evaluate.add(app);
    baseline.add(app);
    ontology.add(app);
    exporter.add(app);
    app.parse_complete_callback([&] {
        log::set_min_level(verbose ? log::Level::Debug : quiet ? log::Level::Warning : log::Level::Info);
    });

    try {
        app.parse(argc, argv);
    } catch (const CLI::Success& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "error[usage]: " << one_line(e.what()) << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error[" << e.category() << "]: " << one_line(e.what()) << "\n";
        return 1;
    } catch (const fs::filesystem_error& e) {
        std::cerr << "error[io]: " << one_line(e.what()) << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error[internal]: " << one_line(e.what()) << "\n";
        return 1;
    }
    return 0;
}
