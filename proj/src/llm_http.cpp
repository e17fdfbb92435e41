#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "thoughtgraph/error.hpp"
#include "thoughtgraph/llm_gateway.hpp"
#include "thoughtgraph/log.hpp"

#include <json.hpp>

#include <algorithm>
#include <thread>

namespace tgraph {

using nlohmann::json;

namespace {

bool transient(int status) { return status == 429 || status >= 500; }

std::chrono::milliseconds backoff_for(const RetryPolicy& retry, int attempt, const httplib::Result& res) {
    std::chrono::milliseconds delay = retry.initial_backoff * (1LL << std::min(attempt - 1, 20));
    if (res && res->has_header("Retry-After")) {
        try {
            delay = std::max(delay, std::chrono::milliseconds(std::stoll(res->get_header_value("Retry-After")) * 1000));
        } catch (const std::exception&) {
        }
    }
    return std::min<std::chrono::milliseconds>(delay, retry.max_backoff);
}

// POSTs body, retrying transient failures. Returns the 200 response body.
std::string post_with_retry(const std::string& base_url, const std::string& path, const std::string& body,
                            const httplib::Headers& headers, const RetryPolicy& retry,
                            std::atomic<std::size_t>* attempt_counter) {
    auto [origin, prefix] = split_base_url(base_url);
    const int max_attempts = std::max(1, retry.max_attempts);
    std::string last_error;
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        if (attempt_counter) ++*attempt_counter;
        httplib::Client client(origin);
        auto secs = std::chrono::duration_cast<std::chrono::seconds>(retry.timeout).count();
        auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(retry.timeout).count() % 1'000'000;
        client.set_connection_timeout(secs, usecs);
        client.set_read_timeout(secs, usecs);
        client.set_write_timeout(secs, usecs);
        auto res = client.Post(prefix + path, headers, body, "application/json");
        if (res && res->status == 200) return res->body;
        if (res && !transient(res->status))
            throw TransportError("HTTP " + std::to_string(res->status) + " from " + origin + prefix + path + ": " +
                                 res->body.substr(0, 200));
        last_error = res ? "HTTP " + std::to_string(res->status) : "transport failure: " + httplib::to_string(res.error());
        if (attempt == max_attempts) break;
        auto delay = backoff_for(retry, attempt, res);
        log::warning(origin + prefix + path + " attempt " + std::to_string(attempt) + " failed (" + last_error +
                     "), retrying in " + std::to_string(delay.count()) + " ms");
        std::this_thread::sleep_for(delay);
    }
    throw TransportError("giving up on " + origin + prefix + path + " after " + std::to_string(max_attempts) +
                         " attempts: " + last_error);
}

} // namespace

HttpChat::HttpChat(std::string base_url, std::string api_key, RetryPolicy retry)
    : base_url_(std::move(base_url)), api_key_(std::move(api_key)), retry_(retry) {
    split_base_url(base_url_);
}

ChatResponse HttpChat::chat(const ChatRequest& request) {
    json messages = json::array();
    for (const auto& m : request.messages) messages.push_back({{"role", role_name(m.role)}, {"content", m.content}});
    json body = {{"model", request.model}, {"temperature", request.temperature}, {"messages", messages}};
    if (request.max_tokens) body["max_tokens"] = *request.max_tokens;

    httplib::Headers headers;
    if (!api_key_.empty()) headers.emplace("Authorization", "Bearer " + api_key_);
    auto raw = post_with_retry(base_url_, "/chat/completions", body.dump(), headers, retry_, &attempts_);
    try {
        auto doc = json::parse(raw);
        const auto& choice = doc.at("choices").at(0);
        ChatResponse r;
        const auto& content = choice.at("message").at("content");
        r.text = content.is_null() ? "" : content.get<std::string>();
        if (choice.contains("finish_reason") && !choice.at("finish_reason").is_null())
            r.finish_reason = choice.at("finish_reason").get<std::string>();
        if (doc.contains("usage") && doc.at("usage").is_object()) {
            r.usage.prompt_tokens = doc.at("usage").value("prompt_tokens", std::uint64_t{0});
            r.usage.completion_tokens = doc.at("usage").value("completion_tokens", std::uint64_t{0});
        }
        return r;
    } catch (const json::exception& e) {
        throw TransportError(std::string("unexpected chat completion payload: ") + e.what());
    }
}

HttpEmbedder::HttpEmbedder(std::string base_url, std::size_t max_batch, RetryPolicy retry)
    : base_url_(std::move(base_url)), max_batch_(std::max<std::size_t>(1, max_batch)), retry_(retry) {
    split_base_url(base_url_);
}

std::string HttpEmbedder::model_tag() const {
    std::lock_guard lock(mutex_);
    return model_tag_.empty() ? "http:" + base_url_ : model_tag_;
}

std::vector<EmbeddingVector> HttpEmbedder::embed(std::span<const std::string> texts) {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (std::size_t i = 0; i < texts.size(); i += max_batch_) {
        auto batch = embed_batch(texts.subspan(i, std::min(max_batch_, texts.size() - i)));
        for (auto& v : batch) {
            if (!out.empty() && v.dim != out.front().dim)
                throw IntegrityError("embedding service changed dimension between batches");
            out.push_back(std::move(v));
        }
    }
    return out;
}

std::vector<EmbeddingVector> HttpEmbedder::embed_batch(std::span<const std::string> texts) {
    json body = {{"texts", std::vector<std::string>(texts.begin(), texts.end())}};
    auto raw = post_with_retry(base_url_, "/embed", body.dump(), {}, retry_, nullptr);
    try {
        auto doc = json::parse(raw);
        auto dim = doc.at("dim").get<std::size_t>();
        auto tag = doc.at("model").get<std::string>();
        std::vector<EmbeddingVector> out;
        for (const auto& v : doc.at("vectors")) {
            EmbeddingVector e{v.get<std::vector<double>>(), dim, tag};
            validate(e);
            out.push_back(std::move(e));
        }
        if (out.size() != texts.size())
            throw IntegrityError("embedding service returned " + std::to_string(out.size()) + " vectors for " +
                                 std::to_string(texts.size()) + " texts");
        std::lock_guard lock(mutex_);
        model_tag_ = tag;
        return out;
    } catch (const json::exception& e) {
        throw TransportError(std::string("unexpected /embed payload: ") + e.what());
    }
}

} // namespace tgraph
