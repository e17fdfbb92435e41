#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace tgraph {

// ---- chat ---------------------------------------------------------------

enum class Role { System, User, Assistant };

std::string_view role_name(Role r);

struct ChatMessage {
    Role role = Role::User;
    std::string content;

    bool operator==(const ChatMessage&) const = default;
};

struct ChatRequest {
    std::string model;
    double temperature = 0.7;
    std::vector<ChatMessage> messages;
    std::optional<int> max_tokens;
    // Names the pipeline step ("initial_expand", "vote", ...). Not part of the cache key.
    std::string request_tag;
};

struct Usage {
    std::uint64_t prompt_tokens = 0;
    std::uint64_t completion_tokens = 0;

    bool operator==(const Usage&) const = default;
};

struct ChatResponse {
    std::string text;
    std::string finish_reason = "stop";
    Usage usage;

    bool operator==(const ChatResponse&) const = default;
};

// Throws ValidationError: messages nonempty, first role system or user,
// temperature in [0, 2], max_tokens positive.
void validate(const ChatRequest& request);

// SHA-256 over the canonical JSON of (model, temperature, messages, max_tokens).
std::string cache_key(const ChatRequest& request);

// Implementations must tolerate concurrent calls.
class ChatClient {
public:
    virtual ~ChatClient() = default;
    virtual ChatResponse chat(const ChatRequest& request) = 0;
    virtual std::string describe() const = 0;
};

// Validates the request, calls the client and checks the response invariant.
ChatResponse chat(ChatClient& client, const ChatRequest& request);

// ---- transcripts ----------------------------------------------------------

struct TranscriptEntry {
    std::string request_tag;
    std::string request_digest;
    std::string response_text;
    std::string finish_reason = "stop";

    bool operator==(const TranscriptEntry&) const = default;
};

struct Transcript {
    std::vector<TranscriptEntry> entries;
};

Transcript load_transcript(const std::string& path);
std::string transcript_to_json(const Transcript& transcript);
Transcript transcript_from_json(std::string_view json_text);

// Replays a recorded run. Matching is by request digest; several entries
// with one digest are served in order and the last one repeats.
class TranscriptChat : public ChatClient {
public:
    explicit TranscriptChat(Transcript transcript, std::string label = "transcript");

    ChatResponse chat(const ChatRequest& request) override;
    std::string describe() const override { return "mock:" + label_; }

    std::size_t calls() const;

private:
    std::map<std::string, std::vector<TranscriptEntry>> by_digest_;
    std::map<std::string, std::size_t> served_;
    std::string label_;
    mutable std::mutex mutex_;
    std::size_t calls_ = 0;
};

// Forwards to another client and keeps every exchange as a transcript entry.
class RecordingChat : public ChatClient {
public:
    explicit RecordingChat(ChatClient& inner) : inner_(inner) {}

    ChatResponse chat(const ChatRequest& request) override;
    std::string describe() const override { return inner_.describe(); }

    Transcript transcript() const;

private:
    ChatClient& inner_;
    mutable std::mutex mutex_;
    Transcript transcript_;
};

// ---- response cache ---------------------------------------------------------

// One JSON file per key under a directory. Writes go through a temp file and
// rename, so readers see either the old entry, the new one, or none.
class ResponseCache {
public:
    explicit ResponseCache(std::filesystem::path dir);

    const std::filesystem::path& dir() const { return dir_; }

    // Missing or unreadable entries come back empty.
    std::optional<ChatResponse> load(const std::string& key) const;
    // Throws IoError.
    void store(const std::string& key, const ChatResponse& response) const;

private:
    std::filesystem::path dir_;
};

// Cache hit: no provider call. Miss: provider call, then the response is
// persisted. Cache I/O trouble is logged and never fails the call.
ChatResponse cached_chat(ChatClient& provider, const ResponseCache& cache, const ChatRequest& request);

class CachedChat : public ChatClient {
public:
    CachedChat(ChatClient& provider, ResponseCache cache) : provider_(provider), cache_(std::move(cache)) {}

    ChatResponse chat(const ChatRequest& request) override { return cached_chat(provider_, cache_, request); }
    std::string describe() const override { return provider_.describe(); }

private:
    ChatClient& provider_;
    ResponseCache cache_;
};

// ---- HTTP --------------------------------------------------------------

struct RetryPolicy {
    int max_attempts = 5;
    std::chrono::milliseconds timeout{60'000};
    std::chrono::milliseconds initial_backoff{1'000};
    std::chrono::milliseconds max_backoff{30'000};
};

// OpenAI-compatible chat completions at {base_url}/chat/completions.
// Retries timeouts, 429 and 5xx with exponential backoff.
class HttpChat : public ChatClient {
public:
    HttpChat(std::string base_url, std::string api_key, RetryPolicy retry = {});

    ChatResponse chat(const ChatRequest& request) override;
    std::string describe() const override { return "http:" + base_url_; }

    std::size_t attempts() const { return attempts_; }

private:
    std::string base_url_;
    std::string api_key_;
    RetryPolicy retry_;
    std::atomic<std::size_t> attempts_{0};
};

// ---- embeddings ------------------------------------------------------------

struct EmbeddingVector {
    std::vector<double> values;
    std::size_t dim = 0;
    std::string model_tag;
};

// Throws IntegrityError when length != dim or a value is not finite.
void validate(const EmbeddingVector& v);

class Embedder {
public:
    virtual ~Embedder() = default;
    virtual std::vector<EmbeddingVector> embed(std::span<const std::string> texts) = 0;
    virtual std::string model_tag() const = 0;
};

// Checks inputs, and that the provider answered with one vector per text, all
// of one dimension.
std::vector<EmbeddingVector> embed(Embedder& provider, std::span<const std::string> texts);

// In-memory text -> vector table. Lookups are by normalized text (trimmed,
// case-folded); unknown text is an error.
class DictionaryEmbedder : public Embedder {
public:
    DictionaryEmbedder(std::map<std::string, std::vector<double>> table, std::string model_tag = "dictionary");

    std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override;
    std::string model_tag() const override { return model_tag_; }

    std::size_t size() const { return table_.size(); }
    std::size_t calls() const { return calls_; }

private:
    std::map<std::string, std::vector<double>> table_;
    std::string model_tag_;
    std::size_t dim_ = 0;
    std::atomic<std::size_t> calls_{0};
};

// {"model": tag, "vectors": {"text": [..], ...}}
std::unique_ptr<DictionaryEmbedder> load_dictionary_embedder(const std::string& path);
// One "text<TAB>v1 v2 ... vd" line per entry; '#' lines are comments.
std::unique_ptr<DictionaryEmbedder> load_vectors_file(const std::string& path);

// POST {base_url}/embed with {"texts": [...]}; batches of at most max_batch.
class HttpEmbedder : public Embedder {
public:
    HttpEmbedder(std::string base_url, std::size_t max_batch = 64, RetryPolicy retry = {});

    std::vector<EmbeddingVector> embed(std::span<const std::string> texts) override;
    std::string model_tag() const override;

private:
    std::vector<EmbeddingVector> embed_batch(std::span<const std::string> texts);

    std::string base_url_;
    std::size_t max_batch_;
    RetryPolicy retry_;
    mutable std::mutex mutex_;
    std::string model_tag_;
};

// Splits "scheme://host[:port][/prefix]" into the origin and the path prefix
// (without a trailing slash).
std::pair<std::string, std::string> split_base_url(std::string_view url);

} // namespace tgraph
