// cpp-httplib lives in this translation unit only.
#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "dfqa/gateway.hpp"

namespace dfqa::llm {

HttpEndpoint::HttpEndpoint(HttpConfig config) : config_(std::move(config)) {
    const auto scheme_end = config_.url.find("://");
    if (scheme_end == std::string::npos) throw std::invalid_argument("endpoint URL needs a scheme: " + config_.url);
    const auto path_start = config_.url.find('/', scheme_end + 3);
    scheme_host_port_ = config_.url.substr(0, path_start);
    path_ = path_start == std::string::npos ? "/" : config_.url.substr(path_start);
}

std::string HttpEndpoint::complete(const std::vector<Message>& messages, const GenParams& params) {
    httplib::Client client(scheme_host_port_);
    const auto seconds = static_cast<time_t>(params.timeout_seconds);
    const auto micros = static_cast<time_t>((params.timeout_seconds - static_cast<double>(seconds)) * 1e6);
    client.set_connection_timeout(seconds, micros);
    client.set_read_timeout(seconds, micros);
    client.set_write_timeout(seconds, micros);

    httplib::Headers headers;
    if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

    json msgs = json::array();
    for (const auto& m : messages) msgs.push_back({{"role", prompt::to_string(m.role)}, {"content", m.content}});
    const json body{{"model", params.model_name},
                    {"messages", msgs},
                    {"temperature", params.temperature},
                    {"max_tokens", params.max_tokens}};

    const auto res = client.Post(path_, headers, body.dump(), "application/json");
    if (!res) {
        const auto err = res.error();
        if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read) {
            throw TimeoutError("endpoint timed out: " + httplib::to_string(err));
        }
        throw TransportError("endpoint request failed: " + httplib::to_string(err), true);
    }
    if (res->status == 429) throw RateLimited("endpoint returned 429");
    if (res->status >= 500) throw TransportError("endpoint returned " + std::to_string(res->status), true);
    if (res->status != 200) {
        throw TransportError("endpoint returned " + std::to_string(res->status) + ": " + res->body.substr(0, 500));
    }
    try {
        const auto reply = json::parse(res->body);
        const auto& content = reply.at("choices").at(0).at("message").at("content");
        return content.is_null() ? std::string{} : content.get<std::string>();
    } catch (const json::exception& e) {
        throw TransportError(std::string("unexpected response body: ") + e.what());
    }
}

}  // namespace dfqa::llm
