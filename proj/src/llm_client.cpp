#include "facecap/llm_client.hpp"

#include <cmath>
#include <thread>

#include <httplib.h>

namespace facecap {

HttpLlmClient::HttpLlmClient(HttpLlmConfig config, Sleeper sleeper)
    : config_(std::move(config)), endpoint_(split_endpoint(config_.endpoint)), sleeper_(std::move(sleeper)) {
    if (!sleeper_) {
        sleeper_ = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
    }
}

HttpLlmClient::Endpoint HttpLlmClient::split_endpoint(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw std::invalid_argument("LLM endpoint must start with http:// or https://: '" + url + "'");
    }
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        return {url, "/"};
    }
    return {url.substr(0, path_start), url.substr(path_start)};
}

Json HttpLlmClient::request_body(const std::string& model, const std::string& prompt, const DecodeParams& params) {
    return Json{{"model", model},
                {"messages", Json::array({Json{{"role", "user"}, {"content", prompt}}})},
                {"temperature", params.temperature},
                {"max_tokens", params.max_tokens},
                {"n", 1}};
}

std::string HttpLlmClient::complete(const FusionPrompt& prompt, const DecodeParams& params,
                                    std::uint64_t /*request_seed*/) {
    httplib::Client client(endpoint_.scheme_host_port);
    client.set_connection_timeout(config_.timeout);
    client.set_read_timeout(config_.timeout);
    client.set_write_timeout(config_.timeout);
    httplib::Headers headers;
    if (!config_.auth_token.empty()) {
        headers.emplace("Authorization", "Bearer " + config_.auth_token);
    }
    const std::string body = request_body(config_.model, prompt.text, params).dump();

    std::string last_error;
    auto delay = config_.retry.initial_backoff;
    for (int attempt = 0; attempt <= config_.retry.max_retries; ++attempt) {
        if (attempt > 0) {
            sleeper_(delay);
            delay = std::chrono::milliseconds(
                static_cast<std::int64_t>(std::llround(static_cast<double>(delay.count()) * config_.retry.backoff_multiplier)));
        }
        ++attempts_;
        auto res = client.Post(endpoint_.path, headers, body, "application/json");
        if (!res) {
            last_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status == 429 || res->status >= 500) {
            last_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200) {
            throw ServiceError("LLM service returned HTTP " + std::to_string(res->status) + ": " + res->body);
        }
        try {
            const auto j = Json::parse(res->body);
            return j.at("choices").at(0).at("message").at("content").get<std::string>();
        } catch (const Json::exception& e) {
            throw ServiceError(std::string("malformed LLM response: ") + e.what());
        }
    }
    throw ServiceUnreachable("LLM endpoint " + config_.endpoint + " unreachable after " +
                             std::to_string(config_.retry.max_retries) + " retries: " + last_error);
}

BoundedLlmClient::BoundedLlmClient(LlmClient& inner, std::ptrdiff_t max_in_flight)
    : inner_(inner), slots_(std::max<std::ptrdiff_t>(1, max_in_flight)) {}

std::string BoundedLlmClient::complete(const FusionPrompt& prompt, const DecodeParams& params,
                                       std::uint64_t request_seed) {
    slots_.acquire();
    struct Release {
        std::counting_semaphore<>& s;
        ~Release() { s.release(); }
    } release{slots_};
    return inner_.complete(prompt, params, request_seed);
}

}  // namespace facecap
