#pragma once

#include <algorithm>
#include <functional>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "chainstate/backend.hpp"

namespace chainstate::testing {

/// Answers every request through a callback and keeps the requests it saw.
class ScriptedBackend : public backend::ModelBackend {
public:
    using Script = std::function<std::string(const backend::CompletionRequest&)>;

    explicit ScriptedBackend(Script script) : script_(std::move(script)) {}

    /// Returns the completions in order, then repeats the last one.
    static ScriptedBackend sequence(std::vector<std::string> completions) {
        auto i = std::make_shared<std::size_t>(0);
        return ScriptedBackend([completions, i](const backend::CompletionRequest&) {
            auto k = std::min(*i, completions.size() - 1);
            ++*i;
            return completions[k];
        });
    }

    std::string name() const override { return "scripted"; }

    std::vector<backend::CompletionRequest> requests() const {
        std::lock_guard lock(mutex_);
        return seen_;
    }

protected:
    std::string generate(const backend::CompletionRequest& request) override {
        {
            std::lock_guard lock(mutex_);
            seen_.push_back(request);
        }
        return script_(request);
    }

private:
    Script script_;
    mutable std::mutex mutex_;
    std::vector<backend::CompletionRequest> seen_;
};

}  // namespace chainstate::testing
