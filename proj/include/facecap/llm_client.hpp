#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <semaphore>
#include <string>

#include "facecap/fusion.hpp"

namespace facecap {

struct RetryPolicy {
    // Retries after the first failed attempt; 3 means up to 4 attempts.
    int max_retries = 3;
    std::chrono::milliseconds initial_backoff{1000};
    double backoff_multiplier = 2.0;
};

struct HttpLlmConfig {
    // e.g. http://localhost:8000/v1/chat/completions
    std::string endpoint;
    std::string model;
    std::string auth_token;
    std::chrono::seconds timeout{120};
    RetryPolicy retry;
};

// Chat-completion client: POSTs {model, messages, temperature, max_tokens, n}
// and reads choices[0].message.content. Connection failures, 429 and 5xx
// are retried with exponential backoff; other HTTP errors raise ServiceError.
class HttpLlmClient final : public LlmClient {
public:
    using Sleeper = std::function<void(std::chrono::milliseconds)>;

    explicit HttpLlmClient(HttpLlmConfig config, Sleeper sleeper = {});

    std::string complete(const FusionPrompt& prompt, const DecodeParams& params, std::uint64_t request_seed) override;
    std::string model_id() const override { return config_.model; }

    // Total HTTP attempts made, including retries.
    std::uint64_t attempts() const { return attempts_.load(); }

    static Json request_body(const std::string& model, const std::string& prompt, const DecodeParams& params);

private:
    struct Endpoint {
        std::string scheme_host_port;
        std::string path;
    };
    static Endpoint split_endpoint(const std::string& url);

    HttpLlmConfig config_;
    Endpoint endpoint_;
    Sleeper sleeper_;
    std::atomic<std::uint64_t> attempts_{0};
};

// Caps the number of requests in flight against a shared client.
class BoundedLlmClient final : public LlmClient {
public:
    BoundedLlmClient(LlmClient& inner, std::ptrdiff_t max_in_flight);

    std::string complete(const FusionPrompt& prompt, const DecodeParams& params, std::uint64_t request_seed) override;
    std::string model_id() const override { return inner_.model_id(); }

private:
    LlmClient& inner_;
    std::counting_semaphore<> slots_;
};

}  // namespace facecap
