#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cstdlib>

#include "gaapo/llm_gateway.hpp"

namespace gaapo {

namespace {

/// Splits "https://host:port/prefix" into ("https://host:port", "/prefix").
std::pair<std::string, std::string> split_base_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw Error(ErrorCode::ConfigError, "base_url needs a scheme: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) return {url, ""};
    std::string prefix = url.substr(path_start);
    while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    return {url.substr(0, path_start), prefix};
}

}  // namespace

HttpBackend::HttpBackend(BackendConfig config) : config_(std::move(config)) {
    std::tie(scheme_host_port_, path_prefix_) = split_base_url(config_.base_url);
}

CompletionResponse HttpBackend::send(const CompletionRequest& request) {
    const char* key = std::getenv(config_.api_key_env_var.c_str());
    if (key == nullptr || *key == '\0')
        throw BackendFailure(ErrorCode::AuthError, false,
                             "environment variable " + config_.api_key_env_var + " is not set");

    Json messages = Json::array();
    for (const auto& m : request.messages) messages.push_back({{"role", to_string(m.role)}, {"content", m.text}});
    const Json body{{"model", request.model_id},
                    {"messages", std::move(messages)},
                    {"temperature", request.temperature},
                    {"max_tokens", request.max_tokens}};

    httplib::Client client(scheme_host_port_);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    client.set_write_timeout(config_.timeout);
    client.set_bearer_token_auth(key);

    const auto res = client.Post(path_prefix_ + "/chat/completions", body.dump(), "application/json");
    if (!res) throw BackendFailure(ErrorCode::BackendUnavailable, true, "transport error: " + httplib::to_string(res.error()));

    const int status = res->status;
    if (status == 429 || status >= 500)
        throw BackendFailure(ErrorCode::BackendUnavailable, true, "HTTP " + std::to_string(status));
    if (status == 401 || status == 403)
        throw BackendFailure(ErrorCode::AuthError, false, "HTTP " + std::to_string(status) + ": " + res->body);
    if (status < 200 || status >= 300)
        throw BackendFailure(ErrorCode::BackendUnavailable, false, "HTTP " + std::to_string(status) + ": " + res->body);

    try {
        const auto j = Json::parse(res->body);
        CompletionResponse out;
        const auto& content = j.at("choices").at(0).at("message").at("content");
        out.text = content.is_null() ? std::string{} : content.get<std::string>();
        if (const auto it = j.find("usage"); it != j.end() && it->is_object()) {
            out.usage.prompt_tokens = it->value("prompt_tokens", std::uint64_t{0});
            out.usage.completion_tokens = it->value("completion_tokens", std::uint64_t{0});
        }
        out.backend = "http";
        return out;
    } catch (const Json::exception& e) {
        throw BackendFailure(ErrorCode::BackendUnavailable, false, std::string("malformed completion response: ") + e.what());
    }
}

}  // namespace gaapo
