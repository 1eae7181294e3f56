#include "dfqa/gateway.hpp"

#include "dfqa/text.hpp"

#include <openssl/evp.h>

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <thread>

namespace dfqa::llm {

namespace fs = std::filesystem;

void check_params(const GenParams& params) {
    if (!(params.temperature >= 0)) throw std::invalid_argument("temperature must be >= 0");
    if (params.max_tokens == 0) throw std::invalid_argument("max_tokens must be >= 1");
}

std::string canonical_request(const std::vector<Message>& messages, const GenParams& params) {
    json msgs = json::array();
    for (const auto& m : messages) msgs.push_back({{"role", prompt::to_string(m.role)}, {"content", m.content}});
    // nlohmann::json objects are key-sorted, so dump() is canonical.
    const json req{{"messages", msgs},
                   {"model", params.model_name},
                   {"temperature", params.temperature},
                   {"max_tokens", params.max_tokens}};
    return req.dump(-1, ' ', false, json::error_handler_t::strict);
}

std::string sha256_hex(std::string_view data) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
        throw Error("SHA-256 failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(kHex[digest[i] >> 4]);
        out.push_back(kHex[digest[i] & 0xf]);
    }
    return out;
}

std::string cache_key(const std::vector<Message>& messages, const GenParams& params) {
    return sha256_hex(canonical_request(messages, params));
}

std::optional<HttpConfig> http_config_from_env() {
    const char* url = std::getenv("DFQA_LLM_URL");
    if (!url || !*url) return std::nullopt;
    const char* key = std::getenv("DFQA_LLM_API_KEY");
    return HttpConfig{url, key ? key : ""};
}

std::string_view to_string(CacheMode mode) {
    switch (mode) {
        case CacheMode::Off: return "off";
        case CacheMode::Record: return "record";
        case CacheMode::ReplayOnly: return "replay_only";
    }
    return "off";
}

CacheMode parse_cache_mode(std::string_view text) {
    if (text == "off") return CacheMode::Off;
    if (text == "record") return CacheMode::Record;
    if (text == "replay_only" || text == "replay-only") return CacheMode::ReplayOnly;
    throw Error("unknown cache mode '" + std::string(text) + "'");
}

Gateway::Gateway(std::shared_ptr<Endpoint> endpoint, std::string cache_dir, CacheMode mode, RetryPolicy retry)
    : endpoint_(std::move(endpoint)), cache_dir_(std::move(cache_dir)), mode_(mode), retry_(std::move(retry)) {
    if (retry_.max_attempts < 1) throw std::invalid_argument("retry max_attempts must be >= 1");
    if (!retry_.sleep) retry_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    if (mode_ != CacheMode::Off) {
        if (cache_dir_.empty()) throw std::invalid_argument("cache directory required unless cache mode is off");
        fs::create_directories(cache_dir_);
    }
}

std::optional<std::string> Gateway::cache_read(const std::string& key) const {
    const auto path = fs::path(cache_dir_) / (key + ".json");
    if (!fs::exists(path)) return std::nullopt;
    try {
        const auto entry = json::parse(text::read_file(path.string()));
        return entry.at("response").at("text").get<std::string>();
    } catch (const std::exception& e) {
        throw GatewayError("corrupt cache entry " + path.string() + ": " + e.what());
    }
}

void Gateway::cache_write(const std::string& key, const std::string& request, const std::string& completion) {
    const json entry{{"key", key}, {"request", json::parse(request)}, {"response", {{"text", completion}}}};
    text::write_file_atomic((fs::path(cache_dir_) / (key + ".json")).string(), entry.dump(2) + "\n");
}

std::string Gateway::call_with_retry(const std::vector<Message>& messages, const GenParams& params) {
    if (!endpoint_) throw TransportError("no endpoint configured (set DFQA_LLM_URL)");
    thread_local std::mt19937_64 rng{std::random_device{}()};
    for (int attempt = 0;; ++attempt) {
        try {
            {
                std::lock_guard lock(mu_);
                ++stats_.endpoint_calls;
            }
            return endpoint_->complete(messages, params);
        } catch (const TransportError& e) {
            if (!e.retryable || attempt + 1 >= retry_.max_attempts) throw;
        } catch (const RateLimited&) {
            if (attempt + 1 >= retry_.max_attempts) throw;
        } catch (const TimeoutError&) {
            if (attempt + 1 >= retry_.max_attempts) throw;
        }
        const auto base = retry_.base_delay * (1LL << attempt);
        std::uniform_real_distribution<double> extra(0.0, retry_.jitter);
        const auto delay = base + std::chrono::duration_cast<std::chrono::milliseconds>(base * extra(rng));
        {
            std::lock_guard lock(mu_);
            ++stats_.retries;
        }
        retry_.sleep(delay);
    }
}

std::string Gateway::complete(const std::vector<Message>& messages, const GenParams& params) {
    check_params(params);
    if (mode_ == CacheMode::Off) return call_with_retry(messages, params);

    const auto request = canonical_request(messages, params);
    const auto key = sha256_hex(request);

    std::promise<std::string> promise;
    std::shared_future<std::string> pending;
    {
        std::lock_guard lock(mu_);
        if (const auto it = in_flight_.find(key); it != in_flight_.end()) {
            pending = it->second;
        } else {
            in_flight_.emplace(key, promise.get_future().share());
        }
    }
    if (pending.valid()) return pending.get();

    const auto settle = [&] {
        std::lock_guard lock(mu_);
        in_flight_.erase(key);
    };
    try {
        std::string text;
        if (auto hit = cache_read(key)) {
            std::lock_guard lock(mu_);
            ++stats_.cache_hits;
            text = std::move(*hit);
        } else if (mode_ == CacheMode::ReplayOnly) {
            throw CacheMiss("no cached completion for key " + key);
        } else {
            text = call_with_retry(messages, params);
            cache_write(key, request, text);
        }
        promise.set_value(text);
        settle();
        return text;
    } catch (...) {
        promise.set_exception(std::current_exception());
        settle();
        throw;
    }
}

std::vector<CompletionSlot> Gateway::complete_batch(const std::vector<CompletionRequest>& requests,
                                                    std::size_t max_in_flight) {
    if (max_in_flight == 0) throw std::invalid_argument("max_in_flight must be >= 1");
    std::vector<CompletionSlot> out(requests.size());
    std::atomic<std::size_t> next{0};
    const auto work = [&] {
        for (std::size_t i; (i = next.fetch_add(1)) < requests.size();) {
            try {
                out[i].text = complete(requests[i].messages, requests[i].params);
            } catch (const CacheMiss& e) {
                out[i] = {std::nullopt, "CacheMiss", e.what()};
            } catch (const RateLimited& e) {
                out[i] = {std::nullopt, "RateLimited", e.what()};
            } catch (const TimeoutError& e) {
                out[i] = {std::nullopt, "Timeout", e.what()};
            } catch (const TransportError& e) {
                out[i] = {std::nullopt, "TransportError", e.what()};
            } catch (const std::exception& e) {
                out[i] = {std::nullopt, "Error", e.what()};
            }
        }
    };
    const auto n = std::min(max_in_flight, requests.size());
    std::vector<std::thread> threads;
    threads.reserve(n);
    for (std::size_t t = 0; t < n; ++t) threads.emplace_back(work);
    for (auto& t : threads) t.join();
    return out;
}

GatewayStats Gateway::stats() const {
    std::lock_guard lock(mu_);
    return stats_;
}

}  // namespace dfqa::llm
