#include "selfprompt/llm_client.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <random>
#include <thread>

#include <json.hpp>

namespace selfprompt::llm {

using json = nlohmann::ordered_json;

std::string to_string(MessageRole r) {
    switch (r) {
        case MessageRole::system: return "system";
        case MessageRole::user: return "user";
        case MessageRole::assistant: return "assistant";
    }
    return "user";
}

namespace {
MessageRole role_from_string(const std::string& s) {
    if (s == "system") return MessageRole::system;
    if (s == "user") return MessageRole::user;
    if (s == "assistant") return MessageRole::assistant;
    throw ValidationError("unknown message role '" + s + "'");
}
}  // namespace

std::string to_string(FinishReason r) {
    switch (r) {
        case FinishReason::stop: return "stop";
        case FinishReason::length: return "length";
        case FinishReason::error: return "error";
    }
    return "error";
}

std::string CompletionRequest::to_json() const {
    json j;
    j["model"] = model;
    j["messages"] = json::array();
    for (const auto& m : messages) {
        j["messages"].push_back({{"role", llm::to_string(m.role)}, {"content", m.content}});
    }
    j["temperature"] = temperature;
    j["max_tokens"] = max_tokens;
    return j.dump();
}

CompletionRequest CompletionRequest::from_json(const std::string& body) {
    json j = json::parse(body);
    CompletionRequest r;
    r.model = j.at("model").get<std::string>();
    for (const auto& m : j.at("messages")) {
        r.messages.push_back({role_from_string(m.at("role").get<std::string>()),
                              m.at("content").get<std::string>()});
    }
    r.temperature = j.value("temperature", 0.0);
    r.max_tokens = j.value("max_tokens", 512);
    return r;
}

void CompletionRequest::validate() const {
    if (messages.empty()) throw ValidationError("completion request has no messages");
    if (temperature < 0.0) throw ValidationError("temperature must be >= 0");
    if (max_tokens <= 0) throw ValidationError("max_tokens must be positive");
}

void ClientConfig::validate() const {
    if (endpoint.empty()) throw ValidationError("client endpoint is empty");
    if (max_retries < 0) throw ValidationError("max_retries must be >= 0");
    if (backoff_base.count() <= 0) throw ValidationError("backoff base must be > 0");
    if (max_concurrent < 1) throw ValidationError("max concurrent requests must be >= 1");
    if (request_timeout.count() <= 0) throw ValidationError("request timeout must be > 0");
}

CompletionResponse parse_completion_body(const std::string& body) {
    json j = json::parse(body);
    CompletionResponse r;
    r.raw = body;
    std::string finish = "stop";
    const json* content = nullptr;
    if (j.contains("choices") && j["choices"].is_array() && !j["choices"].empty()) {
        const json& choice = j["choices"][0];
        if (choice.contains("message") && choice["message"].contains("content")) {
            content = &choice["message"]["content"];
        } else if (choice.contains("text")) {
            content = &choice["text"];
        }
        if (choice.contains("finish_reason") && choice["finish_reason"].is_string()) {
            finish = choice["finish_reason"].get<std::string>();
        }
    } else if (j.contains("content")) {
        content = &j["content"];
        if (j.contains("finish_reason") && j["finish_reason"].is_string()) {
            finish = j["finish_reason"].get<std::string>();
        }
    }
    if (finish == "stop") {
        r.finish_reason = FinishReason::stop;
    } else if (finish == "length") {
        r.finish_reason = FinishReason::length;
    } else {
        r.finish_reason = FinishReason::error;
    }
    if (content && content->is_string()) {
        r.content = content->get<std::string>();
    } else if (r.finish_reason != FinishReason::error) {
        throw ValidationError("response body has no generated text");
    }
    return r;
}

StubTransport::StubTransport(StubHandler handler) : handler_(std::move(handler)) {}

RawReply StubTransport::send(const CompletionRequest& request, const std::string&,
                             std::chrono::milliseconds) {
    StubReply reply = handler_(request);
    if (reply.timeout) throw AttemptTimeout("stub timeout");
    if (reply.status < 200 || reply.status >= 300) {
        return {reply.status, R"({"error":{"message":"stub failure"}})"};
    }
    json body;
    body["object"] = "chat.completion";
    body["model"] = request.model;
    body["choices"] = json::array();
    body["choices"].push_back({{"index", 0},
                               {"message", {{"role", "assistant"}, {"content", reply.content}}},
                               {"finish_reason", reply.finish_reason}});
    return {reply.status, body.dump()};
}

StubRegistry& StubRegistry::instance() {
    static StubRegistry registry;
    return registry;
}

void StubRegistry::add(const std::string& name, StubHandler handler) {
    std::lock_guard lock(mu_);
    handlers_[name] = std::move(handler);
}

void StubRegistry::remove(const std::string& name) {
    std::lock_guard lock(mu_);
    handlers_.erase(name);
}

std::optional<StubHandler> StubRegistry::find(const std::string& name) const {
    std::lock_guard lock(mu_);
    auto it = handlers_.find(name);
    if (it == handlers_.end()) return std::nullopt;
    return it->second;
}

std::shared_ptr<Transport> make_transport(const ClientConfig& config) {
    constexpr std::string_view kStub = "stub:";
    if (config.endpoint.rfind(kStub, 0) == 0) {
        std::string name = config.endpoint.substr(kStub.size());
        auto handler = StubRegistry::instance().find(name);
        if (!handler) throw ValidationError("no stub registered under '" + name + "'");
        return std::make_shared<StubTransport>(*handler);
    }
    return make_http_transport(config);
}

AuditLog::AuditLog(std::filesystem::path path) : path_(std::move(path)) {
    if (path_->has_parent_path()) std::filesystem::create_directories(path_->parent_path());
}

void AuditLog::append(Entry entry) {
    std::lock_guard lock(mu_);
    if (path_) {
        std::ofstream out(*path_, std::ios::app | std::ios::binary);
        if (!out) throw IoError("cannot append to audit log " + path_->string());
        json j;
        j["endpoint"] = entry.endpoint;
        j["attempt"] = entry.attempt;
        j["status"] = entry.status;
        j["request"] = entry.request;
        j["response"] = entry.response;
        out << j.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
    }
    entries_.push_back(std::move(entry));
}

std::vector<AuditLog::Entry> AuditLog::entries() const {
    std::lock_guard lock(mu_);
    return entries_;
}

namespace {
std::uint64_t initial_jitter_seed(const ClientConfig& config) {
    if (config.jitter_seed) return *config.jitter_seed;
    std::random_device rd;
    return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

bool retryable_status(int status) {
    return status == 0 || status == 408 || status == 429 || status >= 500;
}
}  // namespace

LlmClient::LlmClient(ClientConfig config, std::shared_ptr<Transport> transport,
                     std::shared_ptr<AuditLog> audit)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      audit_(std::move(audit)),
      jitter_rng_(initial_jitter_seed(config_)) {
    config_.validate();
    if (!transport_) throw ValidationError("LlmClient requires a transport");
}

LlmClient::LlmClient(ClientConfig config, std::shared_ptr<AuditLog> audit)
    : LlmClient(config, make_transport(config), std::move(audit)) {}

std::chrono::milliseconds LlmClient::backoff_delay(int retry_index) {
    double base = static_cast<double>(config_.backoff_base.count());
    double delay = std::min(base * std::pow(2.0, retry_index),
                            static_cast<double>(config_.backoff_max.count()));
    double jitter;
    {
        std::lock_guard lock(mu_);
        jitter = jitter_rng_.uniform();
    }
    // Full delay shrunk by up to 25%.
    delay *= 1.0 - 0.25 * jitter;
    return std::chrono::milliseconds(static_cast<long long>(delay));
}

std::uint64_t LlmClient::attempts_made() const {
    std::lock_guard lock(mu_);
    return attempts_;
}

CompletionResponse LlmClient::complete(const CompletionRequest& request) {
    request.validate();
    const std::string body = request.to_json();
    const int max_attempts = config_.max_retries + 1;

    int last_status = 0;
    bool last_was_timeout = false;
    std::string last_body;

    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
        if (attempt > 1) std::this_thread::sleep_for(backoff_delay(attempt - 2));
        {
            std::lock_guard lock(mu_);
            ++attempts_;
        }
        RawReply reply;
        try {
            reply = transport_->send(request, body, config_.request_timeout);
        } catch (const AttemptTimeout&) {
            last_was_timeout = true;
            last_status = 0;
            last_body.clear();
            if (audit_) audit_->append({config_.endpoint, body, "", 0, attempt});
            continue;
        }
        last_was_timeout = false;
        last_status = reply.status;
        last_body = reply.body;
        if (audit_) audit_->append({config_.endpoint, body, reply.body, reply.status, attempt});

        if (reply.status >= 200 && reply.status < 300) {
            try {
                return parse_completion_body(reply.body);
            } catch (const std::exception& e) {
                throw ProtocolError(std::string("unusable response body: ") + e.what(), reply.status,
                                    attempt, text::excerpt(reply.body));
            }
        }
        if (!retryable_status(reply.status)) {
            throw ProtocolError("endpoint returned HTTP " + std::to_string(reply.status), reply.status,
                                attempt, text::excerpt(reply.body));
        }
    }

    if (last_was_timeout) {
        throw TimeoutError("request timed out after " + std::to_string(max_attempts) + " attempts",
                           0, max_attempts);
    }
    if (last_status == 0) {
        throw TransportError("transport failed after " + std::to_string(max_attempts) +
                                 " attempts: " + text::excerpt(last_body),
                             0, max_attempts);
    }
    throw ProtocolError("endpoint returned HTTP " + std::to_string(last_status) + " after " +
                            std::to_string(max_attempts) + " attempts",
                        last_status, max_attempts, text::excerpt(last_body));
}

BatchResult LlmClient::complete_batch(const std::map<std::string, CompletionRequest>& requests) {
    std::vector<const std::pair<const std::string, CompletionRequest>*> items;
    items.reserve(requests.size());
    for (const auto& kv : requests) items.push_back(&kv);

    std::vector<BatchOutcome> outcomes(items.size());
    std::atomic<std::size_t> next{0};

    auto worker = [&] {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= items.size()) return;
            BatchOutcome& out = outcomes[i];
            try {
                out.response = complete(items[i]->second);
            } catch (const TimeoutError& e) {
                out.error_kind = BatchErrorKind::timeout;
                out.error = e.what();
            } catch (const ProtocolError& e) {
                out.error_kind = BatchErrorKind::protocol;
                out.error = e.what();
                out.last_status = e.last_status();
            } catch (const TransportError& e) {
                out.error_kind = BatchErrorKind::transport;
                out.error = e.what();
                out.last_status = e.last_status();
            } catch (const std::exception& e) {
                out.error_kind = BatchErrorKind::other;
                out.error = e.what();
            }
        }
    };

    const std::size_t n_workers =
        std::min<std::size_t>(static_cast<std::size_t>(config_.max_concurrent), items.size());
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (std::size_t w = 0; w < n_workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();

    BatchResult result;
    for (std::size_t i = 0; i < items.size(); ++i) {
        result.emplace(items[i]->first, std::move(outcomes[i]));
    }
    return result;
}

CompletionResponse complete(const ClientConfig& config, const CompletionRequest& request) {
    LlmClient client(config);
    return client.complete(request);
}

BatchResult complete_batch(const ClientConfig& config,
                           const std::map<std::string, CompletionRequest>& requests) {
    LlmClient client(config);
    return client.complete_batch(requests);
}

}  // namespace selfprompt::llm
