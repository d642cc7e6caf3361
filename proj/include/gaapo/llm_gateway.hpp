#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "gaapo/domain.hpp"
#include "gaapo/error.hpp"

namespace gaapo {

enum class Role { System, User, Assistant };
enum class Purpose { Generation, Prediction, Judging };

std::string_view to_string(Role role);
std::string_view to_string(Purpose purpose);

struct Message {
    Role role = Role::User;
    std::string text;
    friend bool operator==(const Message&, const Message&) = default;
};

struct CompletionRequest {
    std::vector<Message> messages;
    std::string model_id;
    double temperature = 0.0;
    int max_tokens = 1024;
    Purpose purpose = Purpose::Prediction;

    /// At least one message and the last one from the user.
    void validate() const;
    /// Text of the final user message.
    [[nodiscard]] const std::string& user_text() const { return messages.back().text; }
};

struct Usage {
    std::uint64_t prompt_tokens = 0;
    std::uint64_t completion_tokens = 0;
    friend bool operator==(const Usage&, const Usage&) = default;
};

struct CompletionResponse {
    std::string text;
    Usage usage;
    std::string backend;
    bool cached = false;
    friend bool operator==(const CompletionResponse&, const CompletionResponse&) = default;
};

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view bytes);

/// Content address of a request: SHA-256 (hex) of its canonical JSON form.
/// Covers messages, model, temperature and max_tokens; ignores purpose.
std::string canonical_request_hash(const CompletionRequest& request);

enum class BackendKind { Http, Mock, Replay };
std::string_view to_string(BackendKind kind);
BackendKind parse_backend_kind(std::string_view name);

struct RetryPolicy {
    int max_attempts = 3;
    std::chrono::milliseconds base_backoff{500};
};

struct BackendConfig {
    BackendKind kind = BackendKind::Mock;
    std::string base_url;
    std::string api_key_env_var;
    int max_concurrency = 8;
    RetryPolicy retry;
    std::chrono::milliseconds timeout{120000};
    /// Content-addressed response cache. Required for replay; when set for
    /// http/mock every live response is recorded to it.
    std::filesystem::path cache_path;

    void validate() const;
};

void to_json(Json& j, const BackendConfig& c);
void from_json(const Json& j, BackendConfig& c);

/// Failure raised by a backend transport. Transient failures are retried.
class BackendFailure : public Error {
public:
    BackendFailure(ErrorCode code, bool transient, const std::string& message)
        : Error(code, message), transient_(transient) {}
    [[nodiscard]] bool transient() const noexcept { return transient_; }

private:
    bool transient_;
};

struct PurposeCounts {
    std::uint64_t requests = 0;
    std::uint64_t cache_hits = 0;
    std::uint64_t failures = 0;
    std::uint64_t attempts = 0;

    [[nodiscard]] std::uint64_t live() const { return requests - cache_hits; }
    friend bool operator==(const PurposeCounts&, const PurposeCounts&) = default;
};

struct LedgerSnapshot {
    std::array<PurposeCounts, 3> by_purpose{};

    [[nodiscard]] const PurposeCounts& of(Purpose p) const { return by_purpose[static_cast<std::size_t>(p)]; }
    [[nodiscard]] PurposeCounts total() const;
    friend LedgerSnapshot operator-(const LedgerSnapshot& a, const LedgerSnapshot& b);
    friend bool operator==(const LedgerSnapshot&, const LedgerSnapshot&) = default;
};

void to_json(Json& j, const LedgerSnapshot& s);
void from_json(const Json& j, LedgerSnapshot& s);

/// Per-purpose call counters. Monotone; safe for concurrent increments.
class CallLedger {
public:
    void add_request(Purpose p) { slot(p).requests.fetch_add(1, std::memory_order_relaxed); }
    void add_cache_hit(Purpose p) { slot(p).cache_hits.fetch_add(1, std::memory_order_relaxed); }
    void add_failure(Purpose p) { slot(p).failures.fetch_add(1, std::memory_order_relaxed); }
    void add_attempt(Purpose p) { slot(p).attempts.fetch_add(1, std::memory_order_relaxed); }
    [[nodiscard]] LedgerSnapshot snapshot() const;

private:
    struct Counters {
        std::atomic<std::uint64_t> requests{0};
        std::atomic<std::uint64_t> cache_hits{0};
        std::atomic<std::uint64_t> failures{0};
        std::atomic<std::uint64_t> attempts{0};
    };
    Counters& slot(Purpose p) { return counters_[static_cast<std::size_t>(p)]; }
    std::array<Counters, 3> counters_;
};

/// A transport that turns one request into one response, or throws BackendFailure.
class Backend {
public:
    virtual ~Backend() = default;
    virtual CompletionResponse send(const CompletionRequest& request) = 0;
    [[nodiscard]] virtual std::string_view name() const = 0;
};

/// Deterministic stand-in for an LLM: maps a request to response text.
using MockOracle = std::function<std::string(const CompletionRequest&)>;

class MockBackend final : public Backend {
public:
    explicit MockBackend(MockOracle oracle) : oracle_(std::move(oracle)) {}
    CompletionResponse send(const CompletionRequest& request) override;
    [[nodiscard]] std::string_view name() const override { return "mock"; }

private:
    MockOracle oracle_;
};

/// OpenAI-compatible chat completions over HTTP(S).
class HttpBackend final : public Backend {
public:
    explicit HttpBackend(BackendConfig config);
    CompletionResponse send(const CompletionRequest& request) override;
    [[nodiscard]] std::string_view name() const override { return "http"; }

private:
    BackendConfig config_;
    std::string scheme_host_port_;
    std::string path_prefix_;
};

/// Append-only line-delimited JSON of {key, response}. First record of a key wins.
class ResponseCache {
public:
    ResponseCache() = default;
    explicit ResponseCache(std::filesystem::path path);

    std::optional<CompletionResponse> lookup(const std::string& key) const;
    void record(const std::string& key, const CompletionResponse& response);
    [[nodiscard]] std::size_t size() const;

private:
    std::filesystem::path path_;
    mutable std::shared_mutex mutex_;
    std::unordered_map<std::string, CompletionResponse> entries_;
};

struct BatchItem {
    std::optional<CompletionResponse> response;
    std::optional<Error> error;
    [[nodiscard]] bool ok() const { return response.has_value(); }
};

using SleepFn = std::function<void(std::chrono::milliseconds)>;

/// Single entry point for every LLM call: caching, retries, accounting and
/// bounded-concurrency batches. Safe for concurrent use.
class LlmGateway {
public:
    /// `live` may be null only for replay configurations.
    LlmGateway(BackendConfig config, std::unique_ptr<Backend> live, SleepFn sleep = {});

    CompletionResponse complete(const CompletionRequest& request);

    /// Responses (or per-item errors) positionally aligned with `requests`,
    /// with at most max_concurrency requests in flight. A replay miss or an
    /// authentication error is rethrown once the batch has finished.
    std::vector<BatchItem> complete_batch(std::span<const CompletionRequest> requests);

    [[nodiscard]] const CallLedger& ledger() const { return ledger_; }
    [[nodiscard]] const BackendConfig& config() const { return config_; }
    [[nodiscard]] int peak_in_flight() const { return peak_in_flight_.load(); }

private:
    CompletionResponse send_with_retry(const CompletionRequest& request);

    BackendConfig config_;
    std::unique_ptr<Backend> live_;
    std::unique_ptr<ResponseCache> cache_;
    SleepFn sleep_;
    CallLedger ledger_;
    std::atomic<int> in_flight_{0};
    std::atomic<int> peak_in_flight_{0};
};

/// Builds a gateway for the configured backend kind. `oracle` is used by mock.
std::unique_ptr<LlmGateway> make_gateway(const BackendConfig& config, MockOracle oracle = {});

}  // namespace gaapo
