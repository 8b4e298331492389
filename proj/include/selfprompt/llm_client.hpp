#pragma once

// Chat-completion client shared by the annotator, the models under
// evaluation and the judge. Transports are pluggable: HTTP for live
// endpoints, in-process stubs for offline runs and tests.

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "selfprompt/text.hpp"

namespace selfprompt::llm {

enum class MessageRole { system, user, assistant };

std::string to_string(MessageRole r);

struct Message {
    MessageRole role = MessageRole::user;
    std::string content;

    bool operator==(const Message&) const = default;
};

struct CompletionRequest {
    std::string model;
    std::vector<Message> messages;
    double temperature = 0.0;
    int max_tokens = 512;

    bool operator==(const CompletionRequest&) const = default;

    /// Wire body: {"model", "messages", "temperature", "max_tokens"}.
    std::string to_json() const;
    static CompletionRequest from_json(const std::string& body);
    void validate() const;
};

enum class FinishReason { stop, length, error };

std::string to_string(FinishReason r);

struct CompletionResponse {
    std::string content;
    FinishReason finish_reason = FinishReason::stop;
    /// Full response body as received, kept for audit logs.
    std::string raw;
};

struct ClientConfig {
    /// `http(s)://host[:port]/path`, or `stub:<name>` for a registered stub.
    std::string endpoint;
    /// Name of the environment variable holding the bearer token; empty for none.
    std::string auth_env;
    int max_retries = 3;
    std::chrono::milliseconds backoff_base{500};
    std::chrono::milliseconds backoff_max{30'000};
    std::chrono::milliseconds request_timeout{120'000};
    int max_concurrent = 4;
    /// Fixes the jitter sequence; otherwise seeded from std::random_device.
    std::optional<std::uint64_t> jitter_seed;

    void validate() const;
};

/// All retries used up without a usable reply.
class TransportError : public Error {
public:
    TransportError(const std::string& what, int last_status, int attempts)
        : Error(what), last_status_(last_status), attempts_(attempts) {}
    int last_status() const { return last_status_; }
    int attempts() const { return attempts_; }

private:
    int last_status_;
    int attempts_;
};

class TimeoutError : public TransportError {
public:
    using TransportError::TransportError;
};

/// The endpoint answered with a non-2xx status or an unusable body.
class ProtocolError : public TransportError {
public:
    ProtocolError(const std::string& what, int last_status, int attempts, std::string body_excerpt)
        : TransportError(what, last_status, attempts), body_excerpt_(std::move(body_excerpt)) {}
    const std::string& body_excerpt() const { return body_excerpt_; }

private:
    std::string body_excerpt_;
};

/// Thrown by a transport when a single attempt exceeds its deadline.
class AttemptTimeout : public Error {
public:
    using Error::Error;
};

struct RawReply {
    int status = 0;  ///< 0 means no HTTP response (connection failure).
    std::string body;
};

class Transport {
public:
    virtual ~Transport() = default;
    virtual RawReply send(const CompletionRequest& request, const std::string& body,
                          std::chrono::milliseconds timeout) = 0;
};

std::shared_ptr<Transport> make_http_transport(const ClientConfig& config);

/// What a stub handler answers for one attempt.
struct StubReply {
    int status = 200;
    std::string content;
    std::string finish_reason = "stop";
    bool timeout = false;

    static StubReply text(std::string content) { return {200, std::move(content), "stop", false}; }
    static StubReply failure(int status) { return {status, "", "stop", false}; }
};

using StubHandler = std::function<StubReply(const CompletionRequest&)>;

/// Wraps a handler and renders its replies as chat-completion bodies.
class StubTransport : public Transport {
public:
    explicit StubTransport(StubHandler handler);
    RawReply send(const CompletionRequest& request, const std::string& body,
                  std::chrono::milliseconds timeout) override;

private:
    StubHandler handler_;
};

/// Process-wide table of named stubs, addressed as `stub:<name>`.
class StubRegistry {
public:
    static StubRegistry& instance();
    void add(const std::string& name, StubHandler handler);
    void remove(const std::string& name);
    std::optional<StubHandler> find(const std::string& name) const;

private:
    mutable std::mutex mu_;
    std::map<std::string, StubHandler> handlers_;
};

/// HTTP transport for URLs, registry lookup for `stub:<name>`.
std::shared_ptr<Transport> make_transport(const ClientConfig& config);

/// Thread-safe append-only transcript log (JSONL on disk when a path is set).
class AuditLog {
public:
    AuditLog() = default;
    explicit AuditLog(std::filesystem::path path);

    struct Entry {
        std::string endpoint;
        std::string request;   ///< wire body
        std::string response;  ///< raw reply body, empty on failure
        int status = 0;
        int attempt = 0;
    };

    void append(Entry entry);
    std::vector<Entry> entries() const;

private:
    mutable std::mutex mu_;
    std::optional<std::filesystem::path> path_;
    std::vector<Entry> entries_;
};

enum class BatchErrorKind { none, transport, timeout, protocol, other };

struct BatchOutcome {
    std::optional<CompletionResponse> response;
    BatchErrorKind error_kind = BatchErrorKind::none;
    std::string error;
    int last_status = 0;

    bool ok() const { return response.has_value(); }
};

using BatchResult = std::map<std::string, BatchOutcome>;

class LlmClient {
public:
    LlmClient(ClientConfig config, std::shared_ptr<Transport> transport,
              std::shared_ptr<AuditLog> audit = nullptr);

    /// Builds the transport from `config` (see make_transport).
    explicit LlmClient(ClientConfig config, std::shared_ptr<AuditLog> audit = nullptr);

    const ClientConfig& config() const { return config_; }

    /// At most max_retries + 1 attempts; throws TransportError subclasses.
    CompletionResponse complete(const CompletionRequest& request);

    /// Runs every request with at most max_concurrent in flight. Failures are
    /// reported per key and never abort the batch.
    BatchResult complete_batch(const std::map<std::string, CompletionRequest>& requests);

    /// Total transport attempts issued by this client.
    std::uint64_t attempts_made() const;

private:
    std::chrono::milliseconds backoff_delay(int retry_index);

    ClientConfig config_;
    std::shared_ptr<Transport> transport_;
    std::shared_ptr<AuditLog> audit_;
    mutable std::mutex mu_;
    SeededRng jitter_rng_;
    std::uint64_t attempts_ = 0;
};

CompletionResponse parse_completion_body(const std::string& body);

/// One-shot helpers mirroring the client methods.
CompletionResponse complete(const ClientConfig& config, const CompletionRequest& request);
BatchResult complete_batch(const ClientConfig& config,
                           const std::map<std::string, CompletionRequest>& requests);

}  // namespace selfprompt::llm
