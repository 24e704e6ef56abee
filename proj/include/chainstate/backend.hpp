#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "chainstate/types.hpp"

namespace chainstate {
class Environment;
}

namespace chainstate::backend {

enum class Purpose { Act, Plan };

struct CompletionRequest {
    std::string prompt;
    double temperature = 0.0;
    double top_p = 1.0;
    std::vector<std::string> stop{"\n\n"};
    int max_tokens = 2000;
    std::optional<std::int64_t> seed;

    // Bookkeeping for replay keys; never sent over the wire.
    std::string episode_id;
    int step = 0;
    Purpose purpose = Purpose::Act;

    /// Chat-completions request body.
    nlohmann::json to_wire(std::string_view model) const;
};

/// Request with library defaults; max_tokens is min(2000, max_model_len)
/// when a model length is configured.
CompletionRequest make_request(std::string prompt, int max_model_len = 0);

/// Cuts `text` at the earliest occurrence of any stop sequence.
std::string apply_stop(std::string_view text, const std::vector<std::string>& stop);

/// Lowercase hex SHA-256 of the prompt.
std::string prompt_digest(std::string_view prompt);

struct Usage {
    std::uint64_t calls = 0;
    std::uint64_t prompt_chars = 0;
    std::uint64_t completion_chars = 0;
};

class ModelBackend {
public:
    virtual ~ModelBackend() = default;

    /// One model call. Stop sequences are re-applied to whatever the
    /// implementation returns. Throws Error(BackendError) or Error(ReplayMiss).
    std::string complete(const CompletionRequest& request);

    virtual std::string name() const = 0;
    Usage usage() const;

protected:
    virtual std::string generate(const CompletionRequest& request) = 0;

private:
    std::atomic<std::uint64_t> calls_{0};
    std::atomic<std::uint64_t> prompt_chars_{0};
    std::atomic<std::uint64_t> completion_chars_{0};
};

struct HttpConfig {
    std::string endpoint = "http://127.0.0.1:8000/v1";   // base URL; "/chat/completions" is appended
    std::string model;
    std::string api_key_env = "OPENAI_API_KEY";           // name of the variable, not the key
    double timeout_seconds = 120.0;
    int retries = 0;
    int max_model_len = 0;
};

/// OpenAI-compatible chat-completions client. Each call opens its own
/// connection, so one instance may be shared between episodes.
class HttpBackend : public ModelBackend {
public:
    explicit HttpBackend(HttpConfig config);
    std::string name() const override { return "http"; }
    const HttpConfig& config() const { return config_; }

protected:
    std::string generate(const CompletionRequest& request) override;

private:
    HttpConfig config_;
    std::string scheme_host_port_;
    std::string base_path_;
};

enum class ReplayMode { ByStep, ByPromptDigest };

ReplayMode parse_replay_mode(std::string_view text);

struct ReplayRecord {
    std::string episode;
    int step = 0;
    std::string prompt_digest;
    std::string completion;
};

/// JSONL record/replay store keyed by (episode, step) or by prompt digest.
class ReplayStore : public ModelBackend {
public:
    /// Loads existing records from `path` when the file exists; record()
    /// appends to it.
    explicit ReplayStore(std::filesystem::path path, ReplayMode mode = ReplayMode::ByStep);

    /// In-memory store; record() keeps records without touching disk.
    explicit ReplayStore(ReplayMode mode = ReplayMode::ByStep);

    std::string name() const override { return "replay"; }
    ReplayMode mode() const { return mode_; }

    /// Throws Error(Validation) if (episode, step) already maps to a
    /// different completion.
    void record(const std::string& episode, int step, std::string_view prompt, const std::string& completion);

    std::size_t size() const;
    std::vector<ReplayRecord> records() const;

protected:
    std::string generate(const CompletionRequest& request) override;

private:
    void insert(ReplayRecord rec);

    std::optional<std::filesystem::path> path_;
    ReplayMode mode_;
    mutable std::mutex mutex_;
    std::vector<ReplayRecord> records_;
    std::map<std::pair<std::string, int>, std::size_t> by_step_;
    std::map<std::string, std::size_t> by_digest_;
};

/// Forwards to another backend and records every exchange.
class RecordingBackend : public ModelBackend {
public:
    RecordingBackend(ModelBackend& inner, ReplayStore& store) : inner_(inner), store_(store) {}
    std::string name() const override { return "record(" + inner_.name() + ")"; }

protected:
    std::string generate(const CompletionRequest& request) override;

private:
    ModelBackend& inner_;
    ReplayStore& store_;
};

/// Scripted solver: answers act requests with the variant's context block for
/// the environment's next oracle move, and plan requests with the oracle's
/// numbered subtask list. Bound to one environment, hence one episode.
class OracleBackend : public ModelBackend {
public:
    OracleBackend(const Environment& env, AgentVariant variant);
    std::string name() const override { return "oracle"; }

protected:
    std::string generate(const CompletionRequest& request) override;

private:
    const Environment& env_;
    AgentVariant variant_;
};

}  // namespace chainstate::backend
