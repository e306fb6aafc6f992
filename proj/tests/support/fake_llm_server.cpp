#include "fake_llm_server.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <httplib.h>

namespace facecap::testing {

FakeLlmServer::FakeLlmServer(std::vector<Reply> script, Reply fallback)
    : server_(std::make_unique<httplib::Server>()),
      script_(script.begin(), script.end()),
      fallback_(std::move(fallback)) {
    server_->Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
        Reply reply;
        {
            std::lock_guard lock(mu_);
            requests_.push_back(Json::parse(req.body, nullptr, false));
            if (script_.empty()) {
                reply = fallback_;
            } else {
                reply = script_.front();
                script_.pop_front();
            }
        }
        res.status = reply.status;
        if (!reply.raw_body.empty()) {
            res.set_content(reply.raw_body, "application/json");
            return;
        }
        const Json body{{"id", "cmpl-test"},
                        {"object", "chat.completion"},
                        {"choices", Json::array({{{"index", 0},
                                                  {"message", {{"role", "assistant"}, {"content", reply.content}}},
                                                  {"finish_reason", "stop"}}})}};
        res.set_content(body.dump(), "application/json");
    });
    port_ = server_->bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
}

FakeLlmServer::~FakeLlmServer() {
    server_->stop();
    thread_.join();
}

std::string FakeLlmServer::endpoint() const {
    return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
}

std::vector<Json> FakeLlmServer::requests() const {
    std::lock_guard lock(mu_);
    return requests_;
}

int closed_port() {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = 0;
    ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
    socklen_t len = sizeof(addr);
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    ::close(fd);
    return ntohs(addr.sin_port);
}

}  // namespace facecap::testing
