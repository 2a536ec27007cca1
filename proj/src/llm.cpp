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

#include "schemabot/llm.hpp"

#include <cstdlib>
#include <iomanip>
#include <sstream>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "schemabot/error.hpp"
#include "schemabot/text.hpp"

namespace schemabot {

using nlohmann::json;

void LlmBackendConfig::validate() const {
    if (temperature < 0.0 || temperature > 2.0) throw ConfigError("temperature must be within [0, 2]");
    if (max_tokens < 1) throw ConfigError("max_tokens must be >= 1");
    if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
    if (max_in_flight < 1) throw ConfigError("max_in_flight must be >= 1");
    if (timeout.count() <= 0) throw ConfigError("timeout must be positive");
}

void LlmBackendConfig::apply_env() {
    if (const char* url = std::getenv("LLM_BASE_URL"); url && *url) base_url = url;
    if (const char* model = std::getenv("LLM_MODEL_ID"); model && *model) model_id = model;
}

CompletionResult complete(LlmBackend& backend, const CompletionRequest& req) {
    if (req.prompt.empty()) throw InvalidArgument("completion prompt is empty");
    return backend.complete(req);
}

std::string prompt_hash(std::string_view prompt) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : prompt) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << h;
    return os.str();
}

// ---- scripted ---------------------------------------------------------------

ScriptedBackend::ScriptedBackend(std::vector<std::string> sequence) : sequence_(std::move(sequence)) {}

ScriptedBackend::ScriptedBackend(std::map<std::string, std::string> by_hash)
    : keyed_(true), by_hash_(std::move(by_hash)) {}

CompletionResult ScriptedBackend::complete(const CompletionRequest& req) {
    std::lock_guard lock(mu_);
    prompts_.push_back(req.prompt);
    CompletionResult r;
    if (!keyed_) {
        if (next_ >= sequence_.size()) throw ProviderError(0, "script exhausted");
        r.text = sequence_[next_++];
        return r;
    }
    const std::string h = prompt_hash(req.prompt);
    if (auto it = by_hash_.find(h); it != by_hash_.end()) {
        r.text = it->second;
        return r;
    }
    // Nearest known hash by longest common hex prefix.
    std::string nearest;
    std::size_t best = 0;
    for (const auto& [known, _] : by_hash_) {
        std::size_t n = 0;
        while (n < h.size() && n < known.size() && h[n] == known[n]) ++n;
        if (nearest.empty() || n > best) {
            nearest = known;
            best = n;
        }
    }
    throw ProviderError(0, "no scripted completion for prompt hash " + h +
                               (nearest.empty() ? std::string() : "; nearest known hash " + nearest));
}

std::vector<std::string> ScriptedBackend::prompts() const {
    std::lock_guard lock(mu_);
    return prompts_;
}

std::size_t ScriptedBackend::calls() const {
    std::lock_guard lock(mu_);
    return prompts_.size();
}

// ---- remote -----------------------------------------------------------------

namespace {

struct SplitUrl {
    std::string origin;  // scheme://host:port
    std::string prefix;  // path prefix without trailing '/'
};

SplitUrl split_url(const std::string& url) {
    const std::size_t scheme = url.find("://");
    const std::size_t path_start = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
    SplitUrl out;
    out.origin = url.substr(0, path_start);
    if (path_start != std::string::npos) out.prefix = url.substr(path_start);
    while (!out.prefix.empty() && out.prefix.back() == '/') out.prefix.pop_back();
    return out;
}

}  // namespace

RemoteBackend::RemoteBackend(LlmBackendConfig config)
    : config_(std::move(config)), in_flight_(std::max(1, config_.max_in_flight)) {
    config_.validate();
    if (const char* key = std::getenv(config_.credential_env.c_str()); key) credential_ = key;
}

RemoteBackend::~RemoteBackend() = default;

CompletionResult RemoteBackend::complete(const CompletionRequest& req) {
    if (req.prompt.empty()) throw InvalidArgument("completion prompt is empty");
    in_flight_.acquire();
    struct Release {
        std::counting_semaphore<>& s;
        ~Release() { s.release(); }
    } release{in_flight_};

    const auto start = std::chrono::steady_clock::now();
    auto backoff = config_.initial_backoff;
    for (int attempt_no = 0;; ++attempt_no) {
        try {
            CompletionResult r = attempt(req);
            r.retries = attempt_no;
            r.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
                std::chrono::steady_clock::now() - start);
            return r;
        } catch (const BackendError& e) {
            if (!e.transient() || attempt_no >= config_.max_retries) throw;
        }
        std::this_thread::sleep_for(backoff);
        backoff *= 2;
    }
}

CompletionResult RemoteBackend::attempt(const CompletionRequest& req) {
    const SplitUrl url = split_url(config_.base_url);
    httplib::Client client(url.origin);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    json body{{"model", config_.model_id},
              {"temperature", req.temperature.value_or(config_.temperature)},
              {"max_tokens", req.max_tokens.value_or(config_.max_tokens)}};
    if (!config_.stop.empty()) body["stop"] = config_.stop;
    std::string path = url.prefix;
    if (config_.api_style == ApiStyle::kChat) {
        body["messages"] = json::array({json{{"role", "user"}, {"content", req.prompt}}});
        path += "/chat/completions";
    } else {
        body["prompt"] = req.prompt;
        path += "/completions";
    }
    httplib::Headers headers;
    if (!credential_.empty()) headers.emplace("Authorization", "Bearer " + credential_);

    auto res = client.Post(path, headers, body.dump(), "application/json");
    if (!res) {
        const auto err = res.error();
        if (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout) {
            throw Timeout("request to " + config_.base_url + " timed out");
        }
        throw ProviderError(0, "transport failure: " + httplib::to_string(err), true);
    }
    const int status = res->status;
    const std::string excerpt = res->body.substr(0, 200);
    if (status == 401 || status == 403) throw AuthFailure("provider rejected credentials (" + std::to_string(status) + ")");
    if (status == 429) throw RateLimited("provider rate limited the request: " + excerpt);
    if (status == 408 || status == 504) throw Timeout("provider timed out (" + std::to_string(status) + ")");
    if (status >= 500) throw ProviderError(status, "provider error " + std::to_string(status) + ": " + excerpt, true);
    if (status != 200) throw ProviderError(status, "provider error " + std::to_string(status) + ": " + excerpt);

    json reply;
    try {
        reply = json::parse(res->body);
    } catch (const json::parse_error&) {
        throw ProviderError(status, "provider returned non-JSON body: " + excerpt);
    }
    CompletionResult r;
    try {
        const json& choice = reply.at("choices").at(0);
        if (config_.api_style == ApiStyle::kChat) {
            r.text = choice.at("message").at("content").get<std::string>();
        } else {
            r.text = choice.at("text").get<std::string>();
        }
    } catch (const json::exception&) {
        throw ProviderError(status, "provider reply has no completion text: " + excerpt);
    }
    if (auto usage = reply.find("usage"); usage != reply.end() && usage->is_object()) {
        r.prompt_tokens = usage->value("prompt_tokens", 0);
        r.completion_tokens = usage->value("completion_tokens", 0);
    }
    return r;
}

}  // namespace schemabot
