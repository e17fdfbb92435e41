#include "thoughtgraph/llm_gateway.hpp"

#include "thoughtgraph/error.hpp"
#include "thoughtgraph/log.hpp"
#include "thoughtgraph/text.hpp"

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <sstream>

namespace tgraph {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view role_name(Role r) {
    switch (r) {
    case Role::System: return "system";
    case Role::User: return "user";
    case Role::Assistant: return "assistant";
    }
    return "user";
}

void validate(const ChatRequest& request) {
    if (request.messages.empty()) throw ValidationError("chat request has no messages");
    if (request.messages.front().role == Role::Assistant)
        throw ValidationError("chat request must open with a system or user message");
    if (!(request.temperature >= 0.0 && request.temperature <= 2.0))
        throw ValidationError("temperature must lie in [0, 2]");
    if (request.max_tokens && *request.max_tokens < 1) throw ValidationError("max_tokens must be positive");
}

std::string cache_key(const ChatRequest& request) {
    json messages = json::array();
    for (const auto& m : request.messages) messages.push_back({{"role", role_name(m.role)}, {"content", m.content}});
    json doc = {{"model", request.model},
                {"temperature", request.temperature},
                {"messages", messages},
                {"max_tokens", request.max_tokens ? json(*request.max_tokens) : json(nullptr)}};
    return text::sha256_hex(doc.dump());
}

ChatResponse chat(ChatClient& client, const ChatRequest& request) {
    validate(request);
    auto response = client.chat(request);
    if (response.text.empty() && response.finish_reason == "stop")
        throw IntegrityError("provider returned an empty completion with finish_reason 'stop'");
    return response;
}

// ---- transcripts ----------------------------------------------------------

std::string transcript_to_json(const Transcript& transcript) {
    json entries = json::array();
    for (const auto& e : transcript.entries)
        entries.push_back({{"request_tag", e.request_tag},
                           {"request_digest", e.request_digest},
                           {"response_text", e.response_text},
                           {"finish_reason", e.finish_reason}});
    json doc = {{"schema_version", 1}, {"entries", entries}};
    return doc.dump(2) + "\n";
}

Transcript transcript_from_json(std::string_view json_text) {
    try {
        auto doc = json::parse(json_text);
        Transcript t;
        for (const auto& j : doc.at("entries")) {
            TranscriptEntry e;
            e.request_tag = j.at("request_tag").get<std::string>();
            e.request_digest = j.at("request_digest").get<std::string>();
            e.response_text = j.at("response_text").get<std::string>();
            if (j.contains("finish_reason")) e.finish_reason = j.at("finish_reason").get<std::string>();
            t.entries.push_back(std::move(e));
        }
        return t;
    } catch (const json::exception& e) {
        throw ParseError(std::string("malformed transcript: ") + e.what());
    }
}

Transcript load_transcript(const std::string& path) { return transcript_from_json(text::read_file(path)); }

TranscriptChat::TranscriptChat(Transcript transcript, std::string label) : label_(std::move(label)) {
    for (auto& e : transcript.entries) by_digest_[e.request_digest].push_back(std::move(e));
}

ChatResponse TranscriptChat::chat(const ChatRequest& request) {
    auto key = cache_key(request);
    std::lock_guard lock(mutex_);
    ++calls_;
    auto it = by_digest_.find(key);
    if (it == by_digest_.end()) throw UnscriptedRequest(request.request_tag, key);
    auto& served = served_[key];
    const auto& entry = it->second[std::min(served, it->second.size() - 1)];
    ++served;
    if (entry.request_tag != request.request_tag)
        log::debug("transcript entry " + key.substr(0, 12) + " recorded as '" + entry.request_tag + "', replayed as '" +
                   request.request_tag + "'");
    return {entry.response_text, entry.finish_reason, {}};
}

std::size_t TranscriptChat::calls() const {
    std::lock_guard lock(mutex_);
    return calls_;
}

ChatResponse RecordingChat::chat(const ChatRequest& request) {
    auto response = inner_.chat(request);
    std::lock_guard lock(mutex_);
    transcript_.entries.push_back({request.request_tag, cache_key(request), response.text, response.finish_reason});
    return response;
}

Transcript RecordingChat::transcript() const {
    std::lock_guard lock(mutex_);
    return transcript_;
}

// ---- response cache ---------------------------------------------------------

ResponseCache::ResponseCache(fs::path dir) : dir_(std::move(dir)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) log::warning("cannot create cache directory " + dir_.string() + ": " + ec.message());
}

std::optional<ChatResponse> ResponseCache::load(const std::string& key) const {
    auto path = dir_ / key;
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::nullopt;
    std::ostringstream ss;
    ss << in.rdbuf();
    try {
        auto j = json::parse(ss.str());
        ChatResponse r;
        r.text = j.at("text").get<std::string>();
        r.finish_reason = j.at("finish_reason").get<std::string>();
        r.usage.prompt_tokens = j.at("prompt_tokens").get<std::uint64_t>();
        r.usage.completion_tokens = j.at("completion_tokens").get<std::uint64_t>();
        return r;
    } catch (const json::exception&) {
        log::warning("corrupt cache entry " + path.string() + " treated as a miss");
        return std::nullopt;
    }
}

void ResponseCache::store(const std::string& key, const ChatResponse& response) const {
    json j = {{"text", response.text},
              {"finish_reason", response.finish_reason},
              {"prompt_tokens", response.usage.prompt_tokens},
              {"completion_tokens", response.usage.completion_tokens}};
    text::write_file_atomic((dir_ / key).string(), j.dump() + "\n");
}

ChatResponse cached_chat(ChatClient& provider, const ResponseCache& cache, const ChatRequest& request) {
    const auto key = cache_key(request);
    if (auto hit = cache.load(key)) return *hit;
    auto response = provider.chat(request);
    try {
        cache.store(key, response);
    } catch (const std::exception& e) {
        log::warning(std::string("response cache write failed, continuing uncached: ") + e.what());
    }
    return response;
}

// ---- embeddings ------------------------------------------------------------

void validate(const EmbeddingVector& v) {
    if (v.dim == 0) throw IntegrityError("embedding has dimension 0");
    if (v.values.size() != v.dim)
        throw IntegrityError("embedding length " + std::to_string(v.values.size()) + " != dim " + std::to_string(v.dim));
    for (double x : v.values)
        if (!std::isfinite(x)) throw IntegrityError("embedding contains a non-finite value");
}

std::vector<EmbeddingVector> embed(Embedder& provider, std::span<const std::string> texts) {
    if (texts.empty()) throw PreconditionError("embed called with no texts");
    for (const auto& t : texts)
        if (text::trim(t).empty()) throw PreconditionError("embed called with an empty text");
    auto out = provider.embed(texts);
    if (out.size() != texts.size())
        throw IntegrityError("embedder returned " + std::to_string(out.size()) + " vectors for " +
                             std::to_string(texts.size()) + " texts");
    for (const auto& v : out) {
        validate(v);
        if (v.dim != out.front().dim) throw IntegrityError("embedding dimensions differ within one batch");
    }
    return out;
}

DictionaryEmbedder::DictionaryEmbedder(std::map<std::string, std::vector<double>> table, std::string model_tag)
    : model_tag_(std::move(model_tag)) {
    for (auto& [k, v] : table) {
        if (dim_ == 0) dim_ = v.size();
        if (v.size() != dim_ || dim_ == 0)
            throw IntegrityError("dictionary vector for '" + k + "' has length " + std::to_string(v.size()) +
                                 ", expected " + std::to_string(dim_));
        auto key = text::normalize_key(k);
        if (!table_.emplace(key, std::move(v)).second)
            throw IntegrityError("dictionary has two entries for '" + key + "'");
    }
}

std::vector<EmbeddingVector> DictionaryEmbedder::embed(std::span<const std::string> texts) {
    ++calls_;
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
        auto it = table_.find(text::normalize_key(t));
        if (it == table_.end()) throw LookupError("no embedding for '" + t + "'");
        out.push_back({it->second, dim_, model_tag_});
    }
    return out;
}

std::unique_ptr<DictionaryEmbedder> load_dictionary_embedder(const std::string& path) {
    try {
        auto doc = json::parse(text::read_file(path));
        std::map<std::string, std::vector<double>> table;
        for (const auto& [k, v] : doc.at("vectors").items()) table.emplace(k, v.get<std::vector<double>>());
        auto tag = doc.value("model", std::string("dictionary"));
        return std::make_unique<DictionaryEmbedder>(std::move(table), tag);
    } catch (const json::exception& e) {
        throw ParseError("malformed embedding dictionary " + path + ": " + e.what());
    }
}

std::unique_ptr<DictionaryEmbedder> load_vectors_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::map<std::string, std::vector<double>> table;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (text::trim(line).empty() || line[0] == '#') continue;
        auto tab = line.find('\t');
        if (tab == std::string::npos) throw ParseError("vectors file line without a tab", line_no);
        std::istringstream ss(line.substr(tab + 1));
        std::vector<double> v;
        double x;
        while (ss >> x) v.push_back(x);
        if (!ss.eof()) throw ParseError("non-numeric vector component", line_no);
        table.emplace(line.substr(0, tab), std::move(v));
    }
    return std::make_unique<DictionaryEmbedder>(std::move(table), "vectors-file:" + fs::path(path).filename().string());
}

std::pair<std::string, std::string> split_base_url(std::string_view url) {
    auto scheme = url.find("://");
    if (scheme == std::string_view::npos) throw ConfigError("base URL '" + std::string(url) + "' lacks a scheme");
    auto slash = url.find('/', scheme + 3);
    std::string origin(url.substr(0, slash));
    std::string prefix = slash == std::string_view::npos ? "" : std::string(url.substr(slash));
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {origin, prefix};
}

} // namespace tgraph
