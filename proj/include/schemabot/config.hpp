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

#include <functional>
#include <memory>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "schemabot/llm.hpp"
#include "schemabot/pipeline.hpp"

namespace schemabot {

// Produces a backend for a dialog or session key. Stateful replay backends are
// created fresh per key; stateless ones are shared.
using BackendProvider = std::function<std::shared_ptr<LlmBackend>(const std::string& key)>;

struct ServeOptions {
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string cors_origin;       // empty disables CORS headers
    std::string bearer_token_env;  // env var holding the static token; empty disables auth
    std::string log_path;          // append-only JSON-lines session log; empty disables
    std::size_t max_threads = 8;
};

struct EngineConfig {
    std::shared_ptr<Engine> engine;
    nlohmann::json backend = "keyword";
    std::string base_dir;  // relative paths in `backend` resolve against this
    ServeOptions serve;
};

PipelineConfig pipeline_config_from_json(const nlohmann::json& j, PipelineConfig base = {});
nlohmann::json to_json(const PipelineConfig& c);

// Paths inside the file resolve relative to the file's directory.
// Throws ConfigError, ValidationError, SyntaxError.
EngineConfig load_engine_config(const std::string& path);
EngineConfig engine_config_from_json(const nlohmann::json& j, const std::string& base_dir);

// Accepts "keyword", "scripted:<file>", "remote", or an object with "type".
// Scripted files hold {"completions": [...]}, {"by_hash": {...}} or
// {"dialogs": {key: [...]}}.
BackendProvider make_backend_provider(const nlohmann::json& spec, const std::string& base_dir = ".");

std::string read_text_file(const std::string& path);
std::string resolve_path(const std::string& base_dir, const std::string& path);

}  // namespace schemabot
