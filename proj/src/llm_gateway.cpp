#include "gaapo/llm_gateway.hpp"

#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <thread>

namespace gaapo {

std::string_view to_string(Role role) {
    switch (role) {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
    }
    return "user";
}

std::string_view to_string(Purpose purpose) {
    switch (purpose) {
        case Purpose::Generation: return "generation";
        case Purpose::Prediction: return "prediction";
        case Purpose::Judging: return "judging";
    }
    return "prediction";
}

std::string_view to_string(BackendKind kind) {
    switch (kind) {
        case BackendKind::Http: return "http";
        case BackendKind::Mock: return "mock";
        case BackendKind::Replay: return "replay";
    }
    return "mock";
}

BackendKind parse_backend_kind(std::string_view name) {
    if (name == "http") return BackendKind::Http;
    if (name == "mock") return BackendKind::Mock;
    if (name == "replay") return BackendKind::Replay;
    throw Error(ErrorCode::ConfigError, "unknown backend kind '" + std::string(name) + "'");
}

void CompletionRequest::validate() const {
    if (messages.empty()) throw Error(ErrorCode::ConfigError, "completion request without messages");
    if (messages.back().role != Role::User)
        throw Error(ErrorCode::ConfigError, "last message of a completion request must be from the user");
    if (temperature < 0.0) throw Error(ErrorCode::ConfigError, "negative temperature");
    if (max_tokens <= 0) throw Error(ErrorCode::ConfigError, "max_tokens must be positive");
}

std::string sha256_hex(std::string_view bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr);
    static constexpr char kHex[] = "0123456789abcdef";
    std::string hex;
    hex.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        hex.push_back(kHex[digest[i] >> 4]);
        hex.push_back(kHex[digest[i] & 0xf]);
    }
    return hex;
}

std::string canonical_request_hash(const CompletionRequest& request) {
    Json messages = Json::array();
    for (const auto& m : request.messages) messages.push_back(Json::array({to_string(m.role), m.text}));
    // Object keys serialize sorted, so the dump is canonical.
    const Json canonical{{"max_tokens", request.max_tokens},
                         {"messages", std::move(messages)},
                         {"model", request.model_id},
                         {"temperature", request.temperature}};
    return sha256_hex(canonical.dump());
}

void BackendConfig::validate() const {
    if (max_concurrency < 1) throw Error(ErrorCode::ConfigError, "max_concurrency must be >= 1");
    if (retry.max_attempts < 1) throw Error(ErrorCode::ConfigError, "retry.max_attempts must be >= 1");
    if (kind == BackendKind::Http && (base_url.empty() || api_key_env_var.empty()))
        throw Error(ErrorCode::ConfigError, "http backend needs base_url and api_key_env_var");
    if (kind == BackendKind::Replay && cache_path.empty())
        throw Error(ErrorCode::ConfigError, "replay backend needs cache_path");
}

void to_json(Json& j, const BackendConfig& c) {
    j = Json{{"kind", to_string(c.kind)},
             {"base_url", c.base_url},
             {"api_key_env_var", c.api_key_env_var},
             {"max_concurrency", c.max_concurrency},
             {"retry", {{"max_attempts", c.retry.max_attempts}, {"base_backoff_ms", c.retry.base_backoff.count()}}},
             {"timeout_ms", c.timeout.count()},
             {"cache_path", c.cache_path.string()}};
}

void from_json(const Json& j, BackendConfig& c) {
    c.kind = parse_backend_kind(j.value("kind", std::string{"mock"}));
    c.base_url = j.value("base_url", std::string{});
    c.api_key_env_var = j.value("api_key_env_var", std::string{});
    c.max_concurrency = j.value("max_concurrency", 8);
    if (j.contains("retry")) {
        const auto& r = j.at("retry");
        c.retry.max_attempts = r.value("max_attempts", 3);
        c.retry.base_backoff = std::chrono::milliseconds(r.value("base_backoff_ms", 500));
    }
    c.timeout = std::chrono::milliseconds(j.value("timeout_ms", 120000));
    c.cache_path = j.value("cache_path", std::string{});
}

PurposeCounts LedgerSnapshot::total() const {
    PurposeCounts t;
    for (const auto& c : by_purpose) {
        t.requests += c.requests;
        t.cache_hits += c.cache_hits;
        t.failures += c.failures;
        t.attempts += c.attempts;
    }
    return t;
}

LedgerSnapshot operator-(const LedgerSnapshot& a, const LedgerSnapshot& b) {
    LedgerSnapshot d;
    for (std::size_t i = 0; i < d.by_purpose.size(); ++i) {
        d.by_purpose[i].requests = a.by_purpose[i].requests - b.by_purpose[i].requests;
        d.by_purpose[i].cache_hits = a.by_purpose[i].cache_hits - b.by_purpose[i].cache_hits;
        d.by_purpose[i].failures = a.by_purpose[i].failures - b.by_purpose[i].failures;
        d.by_purpose[i].attempts = a.by_purpose[i].attempts - b.by_purpose[i].attempts;
    }
    return d;
}

void to_json(Json& j, const LedgerSnapshot& s) {
    j = Json::object();
    for (const auto p : {Purpose::Generation, Purpose::Prediction, Purpose::Judging}) {
        const auto& c = s.of(p);
        j[std::string(to_string(p))] = {{"requests", c.requests},
                                        {"cache_hits", c.cache_hits},
                                        {"failures", c.failures},
                                        {"attempts", c.attempts}};
    }
}

void from_json(const Json& j, LedgerSnapshot& s) {
    for (const auto p : {Purpose::Generation, Purpose::Prediction, Purpose::Judging}) {
        const auto& c = j.at(std::string(to_string(p)));
        auto& dst = s.by_purpose[static_cast<std::size_t>(p)];
        dst.requests = c.at("requests").get<std::uint64_t>();
        dst.cache_hits = c.at("cache_hits").get<std::uint64_t>();
        dst.failures = c.at("failures").get<std::uint64_t>();
        dst.attempts = c.at("attempts").get<std::uint64_t>();
    }
}

LedgerSnapshot CallLedger::snapshot() const {
    LedgerSnapshot s;
    for (std::size_t i = 0; i < counters_.size(); ++i) {
        s.by_purpose[i].requests = counters_[i].requests.load(std::memory_order_relaxed);
        s.by_purpose[i].cache_hits = counters_[i].cache_hits.load(std::memory_order_relaxed);
        s.by_purpose[i].failures = counters_[i].failures.load(std::memory_order_relaxed);
        s.by_purpose[i].attempts = counters_[i].attempts.load(std::memory_order_relaxed);
    }
    return s;
}

CompletionResponse MockBackend::send(const CompletionRequest& request) {
    CompletionResponse r;
    r.text = oracle_(request);
    r.backend = "mock";
    std::uint64_t prompt_chars = 0;
    for (const auto& m : request.messages) prompt_chars += m.text.size();
    // Rough 4-chars-per-token estimate keeps usage plausible.
    r.usage = Usage{prompt_chars / 4, r.text.size() / 4};
    return r;
}

namespace {

Json response_to_json(const CompletionResponse& r) {
    return Json{{"text", r.text},
                {"usage", {{"prompt_tokens", r.usage.prompt_tokens}, {"completion_tokens", r.usage.completion_tokens}}},
                {"backend", r.backend}};
}

CompletionResponse response_from_json(const Json& j) {
    CompletionResponse r;
    r.text = j.at("text").get<std::string>();
    if (j.contains("usage")) {
        r.usage.prompt_tokens = j.at("usage").value("prompt_tokens", std::uint64_t{0});
        r.usage.completion_tokens = j.at("usage").value("completion_tokens", std::uint64_t{0});
    }
    r.backend = j.value("backend", std::string{});
    return r;
}

}  // namespace

ResponseCache::ResponseCache(std::filesystem::path path) : path_(std::move(path)) {
    if (path_.has_parent_path()) {
        std::error_code ec;
        std::filesystem::create_directories(path_.parent_path(), ec);
    }
    std::ifstream in(path_);
    if (!in) return;  // nothing recorded yet
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            const auto j = Json::parse(line);
            entries_.try_emplace(j.at("key").get<std::string>(), response_from_json(j.at("response")));
        } catch (const Json::exception& e) {
            // A crash mid-append can leave a torn final line.
            spdlog::warn("cache {}: skipping unreadable line {}: {}", path_.string(), lineno, e.what());
        }
    }
}

std::optional<CompletionResponse> ResponseCache::lookup(const std::string& key) const {
    std::shared_lock lock(mutex_);
    const auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
}

void ResponseCache::record(const std::string& key, const CompletionResponse& response) {
    std::unique_lock lock(mutex_);
    const auto [it, inserted] = entries_.try_emplace(key, response);
    if (!inserted || path_.empty()) return;
    std::ofstream out(path_, std::ios::app);
    if (!out) throw Error(ErrorCode::Io, "cannot append to cache " + path_.string());
    out << Json{{"key", key}, {"response", response_to_json(response)}}.dump() << '\n';
}

std::size_t ResponseCache::size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
}

LlmGateway::LlmGateway(BackendConfig config, std::unique_ptr<Backend> live, SleepFn sleep)
    : config_(std::move(config)), live_(std::move(live)), sleep_(std::move(sleep)) {
    config_.validate();
    if (!sleep_) sleep_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    if (!config_.cache_path.empty()) cache_ = std::make_unique<ResponseCache>(config_.cache_path);
    if (!live_ && config_.kind != BackendKind::Replay)
        throw Error(ErrorCode::ConfigError, "live backend required for kind " + std::string(to_string(config_.kind)));
}

CompletionResponse LlmGateway::send_with_retry(const CompletionRequest& request) {
    const int max_attempts = config_.retry.max_attempts;
    for (int attempt = 1;; ++attempt) {
        ledger_.add_attempt(request.purpose);
        try {
            return live_->send(request);
        } catch (const BackendFailure& f) {
            if (!f.transient() || attempt >= max_attempts) {
                ledger_.add_failure(request.purpose);
                if (f.code() == ErrorCode::AuthError) throw Error(ErrorCode::AuthError, f.what());
                throw Error(ErrorCode::BackendUnavailable,
                            std::string(f.what()) + " (after " + std::to_string(attempt) + " attempt(s))");
            }
            sleep_(config_.retry.base_backoff * (1LL << (attempt - 1)));
        }
    }
}

CompletionResponse LlmGateway::complete(const CompletionRequest& request) {
    request.validate();
    ledger_.add_request(request.purpose);

    const int now = in_flight_.fetch_add(1) + 1;
    for (int peak = peak_in_flight_.load(); now > peak && !peak_in_flight_.compare_exchange_weak(peak, now);) {
    }
    struct InFlightGuard {
        std::atomic<int>& counter;
        ~InFlightGuard() { counter.fetch_sub(1); }
    } guard{in_flight_};

    std::string key;
    if (cache_) {
        key = canonical_request_hash(request);
        if (auto hit = cache_->lookup(key)) {
            ledger_.add_cache_hit(request.purpose);
            hit->cached = true;
            return *hit;
        }
    }
    if (config_.kind == BackendKind::Replay) {
        ledger_.add_failure(request.purpose);
        throw Error(ErrorCode::ReplayMiss, "no recorded response for request " + key);
    }
    auto response = send_with_retry(request);
    response.cached = false;
    if (cache_) cache_->record(key, response);
    return response;
}

namespace {

/// Replay misses and authentication errors will not go away on their own, so
/// they abort the whole batch instead of degrading into per-item failures.
void rethrow_fatal(const std::vector<BatchItem>& results) {
    for (const auto& r : results)
        if (r.error && (r.error->code() == ErrorCode::ReplayMiss || r.error->code() == ErrorCode::AuthError))
            throw *r.error;
}

}  // namespace

std::vector<BatchItem> LlmGateway::complete_batch(std::span<const CompletionRequest> requests) {
    std::vector<BatchItem> results(requests.size());
    if (requests.empty()) return results;

    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < requests.size(); i = next.fetch_add(1)) {
            try {
                results[i].response = complete(requests[i]);
            } catch (const Error& e) {
                results[i].error = e;
            } catch (const std::exception& e) {
                results[i].error = Error(ErrorCode::BackendUnavailable, e.what());
            }
        }
    };
    const auto workers = std::min<std::size_t>(static_cast<std::size_t>(config_.max_concurrency), requests.size());
    if (workers == 1) {
        worker();
        rethrow_fatal(results);
        return results;
    }
    {
        std::vector<std::jthread> pool;
        pool.reserve(workers);
        for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
    }
    rethrow_fatal(results);
    return results;
}

std::unique_ptr<LlmGateway> make_gateway(const BackendConfig& config, MockOracle oracle) {
    std::unique_ptr<Backend> live;
    switch (config.kind) {
        case BackendKind::Http: live = std::make_unique<HttpBackend>(config); break;
        case BackendKind::Mock:
            if (!oracle) throw Error(ErrorCode::ConfigError, "mock backend needs an oracle");
            live = std::make_unique<MockBackend>(std::move(oracle));
            break;
        case BackendKind::Replay: break;
    }
    return std::make_unique<LlmGateway>(config, std::move(live));
}

}  // namespace gaapo
