#pragma once

#include <functional>
#include <mutex>
#include <random>
#include <vector>
#include <string>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace chainstate::testing {

/// Local chat-completions endpoint that answers with whatever `reply`
/// returns for the posted body. Keeps the last request for inspection.
class StubServer {
public:
    using Reply = std::function<std::string(const nlohmann::json& body)>;

    explicit StubServer(Reply reply, int status = 200) : reply_(std::move(reply)), status_(status) {
        server_.Post("/v1/chat/completions", [this](const httplib::Request& req, httplib::Response& res) {
            auto body = nlohmann::json::parse(req.body);
            {
                std::lock_guard lock(mutex_);
                last_body_ = body;
                last_auth_ = req.get_header_value("Authorization");
                ++hits_;
            }
            if (status_ != 200) {
                res.status = status_;
                res.set_content("{\"error\":\"nope\"}", "application/json");
                return;
            }
            nlohmann::json out{{"choices", {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", reply_(body)}}}}}}};
            res.set_content(out.dump(), "application/json");
        });
        port_ = server_.bind_to_any_port("127.0.0.1");
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    ~StubServer() {
        server_.stop();
        thread_.join();
    }

    std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1"; }

    nlohmann::json last_body() const {
        std::lock_guard lock(mutex_);
        return last_body_;
    }
    std::string last_auth() const {
        std::lock_guard lock(mutex_);
        return last_auth_;
    }
    int hits() const {
        std::lock_guard lock(mutex_);
        return hits_;
    }

private:
    Reply reply_;
    int status_;
    httplib::Server server_;
    int port_ = 0;
    std::thread thread_;
    mutable std::mutex mutex_;
    nlohmann::json last_body_;
    std::string last_auth_;
    int hits_ = 0;
};

/// Text with stop sequences planted at random places.
inline std::string fuzz_completion(std::mt19937_64& rng) {
    static const std::vector<std::string> kPieces{"action: go to fridge 1", "\n", "\n\n", "\n\n\n", " ", "thought: None",
                                                  "\r\n", "x", "\n \n", "{\"a\": 1}", "ü", "\t"};
    std::string out;
    int n = 1 + static_cast<int>(rng() % 12);
    for (int i = 0; i < n; ++i) out += kPieces[rng() % kPieces.size()];
    return out;
}

}  // namespace chainstate::testing
