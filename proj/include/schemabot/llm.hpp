/* Copyright 2026 The schemabot Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

namespace schemabot {

enum class ApiStyle { kChat, kCompletion };

struct LlmBackendConfig {
    std::string model_id = "gpt-3.5-turbo";
    double temperature = 0.5;
    int max_tokens = 256;
    std::vector<std::string> stop = {"\n\n"};
    std::chrono::milliseconds timeout{30000};
    std::string base_url = "http://127.0.0.1:8000/v1";
    // Name of the environment variable holding the API key; never the key itself.
    std::string credential_env = "LLM_API_KEY";
    ApiStyle api_style = ApiStyle::kChat;
    int max_retries = 3;
    std::chrono::milliseconds initial_backoff{250};
    int max_in_flight = 4;

    // Throws ConfigError when an invariant does not hold.
    void validate() const;
    // Applies LLM_BASE_URL / LLM_MODEL_ID overrides from the environment.
    void apply_env();
};

struct CompletionRequest {
    std::string prompt;
    std::optional<double> temperature;
    std::optional<int> max_tokens;
};

struct CompletionResult {
    std::string text;  // exactly what the provider returned
    int prompt_tokens = 0;
    int completion_tokens = 0;
    std::chrono::milliseconds latency{0};
    int retries = 0;
};

class LlmBackend {
  public:
    virtual ~LlmBackend() = default;
    virtual CompletionResult complete(const CompletionRequest& req) = 0;
    virtual std::string name() const = 0;
};

// Checks the request and forwards to the backend.
CompletionResult complete(LlmBackend& backend, const CompletionRequest& req);

// FNV-1a 64-bit of the prompt, as 16 lowercase hex digits.
std::string prompt_hash(std::string_view prompt);

// Deterministic replay, either in call order or keyed by prompt hash.
// Records every prompt it is shown.
class ScriptedBackend : public LlmBackend {
  public:
    explicit ScriptedBackend(std::vector<std::string> sequence);
    explicit ScriptedBackend(std::map<std::string, std::string> by_hash);

    CompletionResult complete(const CompletionRequest& req) override;
    std::string name() const override { return "scripted"; }

    std::vector<std::string> prompts() const;
    std::size_t calls() const;

  private:
    mutable std::mutex mu_;
    bool keyed_ = false;
    std::vector<std::string> sequence_;
    std::map<std::string, std::string> by_hash_;
    std::size_t next_ = 0;
    std::vector<std::string> prompts_;
};

// Remote completion endpoint (chat or text style) over HTTP/JSON.
class RemoteBackend : public LlmBackend {
  public:
    explicit RemoteBackend(LlmBackendConfig config);
    ~RemoteBackend() override;

    CompletionResult complete(const CompletionRequest& req) override;
    std::string name() const override { return "remote:" + config_.model_id; }
    const LlmBackendConfig& config() const { return config_; }

  private:
    CompletionResult attempt(const CompletionRequest& req);

    LlmBackendConfig config_;
    std::string credential_;
    std::counting_semaphore<> in_flight_;
};

// Offline heuristic provider: spots belief values by string match against
// the belief instructions in a DST prompt, and follows the policy skeleton
// in a policy prompt by token overlap with the last user utterance.
// Intended for demos and tests where no model is available.
class KeywordBackend : public LlmBackend {
  public:
    explicit KeywordBackend(double match_threshold = 0.3) : threshold_(match_threshold) {}

    CompletionResult complete(const CompletionRequest& req) override;
    std::string name() const override { return "keyword"; }

  private:
    std::string answer_dst(std::string_view prompt) const;
    std::string answer_policy(std::string_view prompt) const;

    double threshold_;
};

}  // namespace schemabot
