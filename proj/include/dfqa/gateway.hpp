#pragma once

// Chat-completion client with greedy defaults, retries, bounded batch
// concurrency and a content-addressed record/replay cache.

#include "dfqa/json_io.hpp"
#include "dfqa/prompt.hpp"

#include <chrono>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace dfqa::llm {

using prompt::Message;

struct GenParams {
    std::string model_name;
    double temperature = 0.0;
    std::size_t max_tokens = 512;
    double timeout_seconds = 120;
};

/// Throws std::invalid_argument for a negative temperature or zero max_tokens.
void check_params(const GenParams& params);

class GatewayError : public Error {
public:
    using Error::Error;
};
class RateLimited : public GatewayError {
public:
    using GatewayError::GatewayError;
};
class TimeoutError : public GatewayError {
public:
    using GatewayError::GatewayError;
};
class CacheMiss : public GatewayError {
public:
    using GatewayError::GatewayError;
};
class TransportError : public GatewayError {
public:
    TransportError(const std::string& what, bool retryable = false) : GatewayError(what), retryable(retryable) {}
    bool retryable;
};

/// Canonical request JSON: sorted keys, compact, over messages, model,
/// temperature and max_tokens. The timeout does not affect the key.
std::string canonical_request(const std::vector<Message>& messages, const GenParams& params);
std::string sha256_hex(std::string_view data);
/// Hex SHA-256 of canonical_request.
std::string cache_key(const std::vector<Message>& messages, const GenParams& params);

class Endpoint {
public:
    virtual ~Endpoint() = default;
    /// One attempt. Throws RateLimited, TimeoutError or TransportError.
    virtual std::string complete(const std::vector<Message>& messages, const GenParams& params) = 0;
};

struct HttpConfig {
    /// Full URL of the chat-completions route, e.g.
    /// https://api.example.com/v1/chat/completions
    std::string url;
    std::string api_key;
};

/// Reads DFQA_LLM_URL and DFQA_LLM_API_KEY; nullopt when the URL is unset.
std::optional<HttpConfig> http_config_from_env();

/// The common chat-completions JSON shape over HTTP(S).
class HttpEndpoint : public Endpoint {
public:
    explicit HttpEndpoint(HttpConfig config);
    std::string complete(const std::vector<Message>& messages, const GenParams& params) override;

private:
    HttpConfig config_;
    std::string scheme_host_port_;
    std::string path_;
};

enum class CacheMode {
    /// No cache reads or writes.
    Off,
    /// Serve hits from the cache; on a miss call the endpoint and store.
    Record,
    /// Serve hits only; a miss is a CacheMiss error.
    ReplayOnly,
};

std::string_view to_string(CacheMode mode);
CacheMode parse_cache_mode(std::string_view text);

struct RetryPolicy {
    int max_attempts = 5;
    std::chrono::milliseconds base_delay{1000};
    /// Fraction of the delay added at random.
    double jitter = 0.25;
    /// Injectable for tests; defaults to std::this_thread::sleep_for.
    std::function<void(std::chrono::milliseconds)> sleep;
};

struct GatewayStats {
    std::size_t endpoint_calls = 0;
    std::size_t cache_hits = 0;
    std::size_t retries = 0;
};

struct CompletionRequest {
    std::vector<Message> messages;
    GenParams params;
};

struct CompletionSlot {
    std::optional<std::string> text;
    /// Exception class name and message when `text` is empty.
    std::string error_type;
    std::string error;
    bool ok() const { return text.has_value(); }
};

class Gateway {
public:
    /// `endpoint` may be null for replay-only use.
    Gateway(std::shared_ptr<Endpoint> endpoint, std::string cache_dir, CacheMode mode, RetryPolicy retry = {});

    std::string complete(const std::vector<Message>& messages, const GenParams& params);

    /// At most `max_in_flight` concurrent completions; results are in
    /// request order and a failing request only fills its own slot.
    std::vector<CompletionSlot> complete_batch(const std::vector<CompletionRequest>& requests,
                                               std::size_t max_in_flight);

    GatewayStats stats() const;
    CacheMode mode() const { return mode_; }
    const std::string& cache_dir() const { return cache_dir_; }

private:
    std::string call_with_retry(const std::vector<Message>& messages, const GenParams& params);
    std::optional<std::string> cache_read(const std::string& key) const;
    void cache_write(const std::string& key, const std::string& request, const std::string& text);

    std::shared_ptr<Endpoint> endpoint_;
    std::string cache_dir_;
    CacheMode mode_;
    RetryPolicy retry_;
    mutable std::mutex mu_;
    std::map<std::string, std::shared_future<std::string>> in_flight_;
    GatewayStats stats_;
};

}  // namespace dfqa::llm
