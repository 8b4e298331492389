#include <cstdlib>
#include <regex>

#include <httplib.h>

#include "selfprompt/llm_client.hpp"

namespace selfprompt::llm {

namespace {

constexpr const char* kDefaultPath = "/v1/chat/completions";

class HttpTransport : public Transport {
public:
    explicit HttpTransport(const ClientConfig& config) {
        static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)", std::regex::icase);
        std::smatch m;
        if (!std::regex_match(config.endpoint, m, url_re)) {
            throw ValidationError("endpoint '" + config.endpoint + "' is not an http(s) URL");
        }
        base_ = m[1].str();
        path_ = m[2].matched && m[2].str() != "/" ? m[2].str() : kDefaultPath;
        if (!config.auth_env.empty()) {
            const char* token = std::getenv(config.auth_env.c_str());
            if (token == nullptr || *token == '\0') {
                throw ValidationError("auth environment variable " + config.auth_env + " is not set");
            }
            token_ = token;
        }
    }

    RawReply send(const CompletionRequest&, const std::string& body,
                  std::chrono::milliseconds timeout) override {
        // One client per attempt keeps the transport safe for concurrent use.
        httplib::Client cli(base_);
        const auto secs = std::chrono::duration_cast<std::chrono::seconds>(timeout);
        const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(timeout - secs);
        cli.set_connection_timeout(secs.count(), usecs.count());
        cli.set_read_timeout(secs.count(), usecs.count());
        cli.set_write_timeout(secs.count(), usecs.count());
        httplib::Headers headers;
        if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);

        const auto start = std::chrono::steady_clock::now();
        auto res = cli.Post(path_, headers, body, "application/json");
        if (!res) {
            const auto err = res.error();
            const auto elapsed = std::chrono::steady_clock::now() - start;
            if (err == httplib::Error::ConnectionTimeout ||
                (err == httplib::Error::Read && elapsed >= timeout * 9 / 10)) {
                throw AttemptTimeout("request to " + base_ + path_ + " timed out");
            }
            return {0, httplib::to_string(err)};
        }
        return {res->status, res->body};
    }

private:
    std::string base_;
    std::string path_;
    std::string token_;
};

}  // namespace

std::shared_ptr<Transport> make_http_transport(const ClientConfig& config) {
    return std::make_shared<HttpTransport>(config);
}

}  // namespace selfprompt::llm
