#include "chainstate/backend.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <regex>
#include <sstream>

#include <httplib.h>
#include <openssl/evp.h>

#include "chainstate/agent.hpp"
#include "chainstate/codec.hpp"
#include "chainstate/environment.hpp"
#include "chainstate/error.hpp"
#include "chainstate/strings.hpp"

namespace chainstate::backend {

nlohmann::json CompletionRequest::to_wire(std::string_view model) const {
    nlohmann::json j;
    j["model"] = model;
    j["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", prompt}}});
    j["temperature"] = temperature;
    j["top_p"] = top_p;
    j["stop"] = stop;
    j["max_tokens"] = max_tokens;
    if (seed) j["seed"] = *seed;
    return j;
}

CompletionRequest make_request(std::string prompt, int max_model_len) {
    CompletionRequest r;
    r.prompt = std::move(prompt);
    if (max_model_len > 0) r.max_tokens = std::min(r.max_tokens, max_model_len);
    return r;
}

std::string apply_stop(std::string_view text, const std::vector<std::string>& stop) {
    std::size_t cut = text.size();
    for (const auto& s : stop) {
        if (s.empty()) continue;
        auto pos = text.find(s);
        if (pos != std::string_view::npos) cut = std::min(cut, pos);
    }
    return std::string(text.substr(0, cut));
}

std::string prompt_digest(std::string_view prompt) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(prompt.data(), prompt.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw Error(ErrorKind::Io, "sha256 failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 0xf];
    }
    return out;
}

std::string ModelBackend::complete(const CompletionRequest& request) {
    auto text = apply_stop(generate(request), request.stop);
    calls_.fetch_add(1);
    prompt_chars_.fetch_add(request.prompt.size());
    completion_chars_.fetch_add(text.size());
    return text;
}

Usage ModelBackend::usage() const {
    return {calls_.load(), prompt_chars_.load(), completion_chars_.load()};
}

// ---------------------------------------------------------------------------
// HTTP

HttpBackend::HttpBackend(HttpConfig config) : config_(std::move(config)) {
    static const std::regex kUrl{R"(^(https?://[^/]+)(/.*)?$)"};
    std::smatch m;
    if (!std::regex_match(config_.endpoint, m, kUrl))
        throw Error(ErrorKind::Validation, "endpoint must be an http(s) URL: '" + config_.endpoint + "'");
    scheme_host_port_ = m[1];
    base_path_ = m[2].matched ? m[2].str() : "";
    while (!base_path_.empty() && base_path_.back() == '/') base_path_.pop_back();
    if (config_.timeout_seconds <= 0) throw Error(ErrorKind::Validation, "timeout must be positive");
    if (config_.retries < 0) throw Error(ErrorKind::Validation, "retries must be non-negative");
}

std::string HttpBackend::generate(const CompletionRequest& request) {
    auto body = request.to_wire(config_.model).dump();
    httplib::Headers headers;
    if (!config_.api_key_env.empty()) {
        if (const char* key = std::getenv(config_.api_key_env.c_str()); key && *key)
            headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    auto secs = static_cast<time_t>(config_.timeout_seconds);
    auto usecs = static_cast<time_t>((config_.timeout_seconds - static_cast<double>(secs)) * 1e6);

    std::string last_error;
    for (int attempt = 0; attempt <= config_.retries; ++attempt) {
        if (attempt > 0)
            std::cerr << "chainstate: retry " << attempt << "/" << config_.retries << " for " << request.episode_id
                      << " step " << request.step << " after: " << last_error << "\n";
        httplib::Client client(scheme_host_port_);
        client.set_connection_timeout(secs, usecs);
        client.set_read_timeout(secs, usecs);
        client.set_write_timeout(secs, usecs);
        auto res = client.Post(base_path_ + "/chat/completions", headers, body, "application/json");
        if (!res) {
            last_error = "transport error: " + httplib::to_string(res.error());
            continue;
        }
        if (res->status != 200) {
            last_error = "HTTP status " + std::to_string(res->status);
            continue;
        }
        try {
            auto j = nlohmann::json::parse(res->body);
            const auto& choice = j.at("choices").at(0);
            if (choice.contains("message")) return choice.at("message").at("content").get<std::string>();
            return choice.at("text").get<std::string>();
        } catch (const nlohmann::json::exception& e) {
            last_error = std::string("malformed response body: ") + e.what();
        }
    }
    throw Error(ErrorKind::BackendError, last_error);
}

// ---------------------------------------------------------------------------
// replay

ReplayMode parse_replay_mode(std::string_view text) {
    auto t = strings::lower(strings::trim(text));
    if (t == "by_step" || t == "bystep" || t == "step") return ReplayMode::ByStep;
    if (t == "by_prompt_digest" || t == "bypromptdigest" || t == "by_digest" || t == "digest")
        return ReplayMode::ByPromptDigest;
    throw Error(ErrorKind::Validation, "unknown replay mode '" + std::string(text) + "'");
}

ReplayStore::ReplayStore(ReplayMode mode) : mode_(mode) {}

ReplayStore::ReplayStore(std::filesystem::path path, ReplayMode mode) : path_(std::move(path)), mode_(mode) {
    std::ifstream in(*path_);
    if (!in) return;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (strings::trim(line).empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            insert({j.at("episode").get<std::string>(), j.at("step").get<int>(),
                    j.value("prompt_digest", std::string()), j.at("completion").get<std::string>()});
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorKind::Io, path_->string() + ":" + std::to_string(line_no) + ": " + e.what());
        }
    }
}

void ReplayStore::insert(ReplayRecord rec) {
    auto key = std::make_pair(rec.episode, rec.step);
    if (auto it = by_step_.find(key); it != by_step_.end()) {
        if (records_[it->second].completion != rec.completion)
            throw Error(ErrorKind::Validation,
                        "replay key " + rec.episode + "#" + std::to_string(rec.step) + " already recorded");
        return;
    }
    records_.push_back(std::move(rec));
    const auto& r = records_.back();
    by_step_[key] = records_.size() - 1;
    if (!r.prompt_digest.empty()) by_digest_.emplace(r.prompt_digest, records_.size() - 1);
}

void ReplayStore::record(const std::string& episode, int step, std::string_view prompt, const std::string& completion) {
    std::lock_guard lock(mutex_);
    auto before = records_.size();
    insert({episode, step, prompt_digest(prompt), completion});
    if (records_.size() == before || !path_) return;
    std::ofstream out(*path_, std::ios::app);
    if (!out) throw Error(ErrorKind::Io, "cannot append to " + path_->string());
    const auto& r = records_.back();
    nlohmann::ordered_json j{{"episode", r.episode}, {"step", r.step}, {"prompt_digest", r.prompt_digest},
                             {"completion", r.completion}};
    out << j.dump() << "\n";
}

std::size_t ReplayStore::size() const {
    std::lock_guard lock(mutex_);
    return records_.size();
}

std::vector<ReplayRecord> ReplayStore::records() const {
    std::lock_guard lock(mutex_);
    return records_;
}

std::string ReplayStore::generate(const CompletionRequest& request) {
    std::lock_guard lock(mutex_);
    if (mode_ == ReplayMode::ByStep) {
        auto it = by_step_.find({request.episode_id, request.step});
        if (it == by_step_.end())
            throw Error(ErrorKind::ReplayMiss, request.episode_id + "#" + std::to_string(request.step));
        return records_[it->second].completion;
    }
    auto digest = prompt_digest(request.prompt);
    auto it = by_digest_.find(digest);
    if (it == by_digest_.end()) throw Error(ErrorKind::ReplayMiss, "prompt digest " + digest);
    return records_[it->second].completion;
}

std::string RecordingBackend::generate(const CompletionRequest& request) {
    auto text = apply_stop(inner_.complete(request), request.stop);
    store_.record(request.episode_id, request.step, request.prompt, text);
    return text;
}

// ---------------------------------------------------------------------------
// oracle

OracleBackend::OracleBackend(const Environment& env, AgentVariant variant) : env_(env), variant_(std::move(variant)) {}

std::string OracleBackend::generate(const CompletionRequest& request) {
    if (request.purpose == Purpose::Plan) {
        auto plan = env_.oracle_plan();
        std::string out;
        for (std::size_t i = 0; i < plan.size(); ++i) {
            if (i > 0) out += "\n";
            out += std::to_string(i + 1) + ". " + plan[i];
        }
        return out;
    }
    AgentContext ctx;
    if (variant_.include_goal) ctx.goal = agent::extract_goal(env_.initial_observation(), env_.dialect());
    if (variant_.include_state) ctx.state = env_.ground_truth().project(state_keys(variant_)).fields;
    ctx.action = env_.oracle_action();
    auto text = codec::serialize_context(ctx, variant_);
    if (!text.empty() && text.front() == '>') text.erase(0, 1);
    return text;
}

}  // namespace chainstate::backend
