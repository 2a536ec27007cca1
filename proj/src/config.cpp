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

#include "schemabot/config.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "schemabot/text.hpp"

namespace schemabot {

using nlohmann::json;
namespace fs = std::filesystem;

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string resolve_path(const std::string& base_dir, const std::string& path) {
    const fs::path p(path);
    if (p.is_absolute() || base_dir.empty()) return p.string();
    return (fs::path(base_dir) / p).lexically_normal().string();
}

PipelineConfig pipeline_config_from_json(const json& j, PipelineConfig c) {
    if (j.is_null()) return c;
    if (!j.is_object()) throw ConfigError("pipeline config must be an object");
    try {
        c.use_dst_prompter = j.value("use_dst_prompter", c.use_dst_prompter);
        c.use_db = j.value("use_db", c.use_db);
        c.use_policy_prompter = j.value("use_policy_prompter", c.use_policy_prompter);
        c.combined_action_response = j.value("combined_action_response", c.combined_action_response);
        c.db_summary_k = j.value("db_summary_k", c.db_summary_k);
        c.parse_retry_budget = j.value("parse_retry_budget", c.parse_retry_budget);
        c.history_turn_cap = j.value("history_turn_cap", c.history_turn_cap);
        c.delex_history = j.value("delex_history", c.delex_history);
        c.out_of_scope_response = j.value("out_of_scope_response", c.out_of_scope_response);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("pipeline config: ") + e.what());
    }
    if (c.parse_retry_budget < 0) throw ConfigError("parse_retry_budget must be >= 0");
    return c;
}

json to_json(const PipelineConfig& c) {
    return json{{"use_dst_prompter", c.use_dst_prompter},
                {"use_db", c.use_db},
                {"use_policy_prompter", c.use_policy_prompter},
                {"combined_action_response", c.combined_action_response},
                {"db_summary_k", c.db_summary_k},
                {"parse_retry_budget", c.parse_retry_budget},
                {"history_turn_cap", c.history_turn_cap},
                {"delex_history", c.delex_history}};
}

namespace {

std::vector<std::string> path_list(const json& j, const char* key) {
    std::vector<std::string> out;
    auto it = j.find(key);
    if (it == j.end()) return out;
    if (it->is_string()) return {it->get<std::string>()};
    if (!it->is_array()) throw ConfigError(std::string("'") + key + "' must be a path or a list of paths");
    for (const auto& p : *it) out.push_back(p.get<std::string>());
    return out;
}

}  // namespace

EngineConfig engine_config_from_json(const json& j, const std::string& base_dir) {
    if (!j.is_object()) throw ConfigError("engine config must be a JSON object");
    EngineConfig out;
    out.base_dir = base_dir;
    auto engine = std::make_shared<Engine>();

    for (const auto& p : path_list(j, "schemas")) {
        for (auto& s : parse_schema_bundle(read_text_file(resolve_path(base_dir, p)))) {
            if (engine->schema(s.domain)) throw ConfigError("schema domain '" + s.domain + "' is loaded twice");
            engine->schemas.push_back(std::move(s));
        }
    }
    if (engine->schemas.empty()) throw ConfigError("engine config names no schemas");

    if (auto it = j.find("canonical_values"); it != j.end() && it->is_string()) {
        engine->canon = Canonicalizer::from_file(resolve_path(base_dir, it->get<std::string>()));
    }
    for (const auto& p : path_list(j, "dbs")) {
        DbTable t = load_db(read_text_file(resolve_path(base_dir, p)));
        const TaskSchema* s = engine->schema(t.domain());
        if (!s) throw ConfigError("database '" + p + "' has domain '" + t.domain() + "' with no schema");
        // Reload against the schema to pick up undeclared-attribute warnings.
        t = load_db(read_text_file(resolve_path(base_dir, p)), s);
        engine->dbs[t.domain()] = std::move(t);
    }

    engine->config = pipeline_config_from_json(j.value("pipeline", json()));
    if (auto f = j.find("formatting"); f != j.end()) {
        if (f->contains("dst")) engine->config.dst_formatting_example = read_text_file(resolve_path(base_dir, f->at("dst")));
        if (f->contains("policy"))
            engine->config.policy_formatting_example = read_text_file(resolve_path(base_dir, f->at("policy")));
    }
    out.engine = std::move(engine);

    if (auto b = j.find("backend"); b != j.end()) out.backend = *b;
    if (auto s = j.find("serve"); s != j.end()) {
        try {
            out.serve.host = s->value("host", out.serve.host);
            out.serve.port = s->value("port", out.serve.port);
            out.serve.cors_origin = s->value("cors_origin", out.serve.cors_origin);
            out.serve.bearer_token_env = s->value("bearer_token_env", out.serve.bearer_token_env);
            if (s->contains("log_path")) out.serve.log_path = resolve_path(base_dir, s->at("log_path"));
            out.serve.max_threads = s->value("max_threads", out.serve.max_threads);
        } catch (const json::exception& e) {
            throw ConfigError(std::string("serve config: ") + e.what());
        }
    }
    return out;
}

EngineConfig load_engine_config(const std::string& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw SyntaxError(e.byte, "engine config '" + path + "': " + e.what());
    }
    return engine_config_from_json(j, fs::path(path).parent_path().string());
}

namespace {

LlmBackendConfig remote_config(const json& spec) {
    LlmBackendConfig c;
    c.apply_env();
    if (!spec.is_object()) return c;
    try {
        c.model_id = spec.value("model_id", c.model_id);
        c.base_url = spec.value("base_url", c.base_url);
        c.temperature = spec.value("temperature", c.temperature);
        c.max_tokens = spec.value("max_tokens", c.max_tokens);
        if (spec.contains("stop")) c.stop = spec.at("stop").get<std::vector<std::string>>();
        c.timeout = std::chrono::milliseconds(spec.value("timeout_ms", static_cast<long>(c.timeout.count())));
        c.credential_env = spec.value("credential_env", c.credential_env);
        c.max_retries = spec.value("max_retries", c.max_retries);
        c.initial_backoff =
            std::chrono::milliseconds(spec.value("initial_backoff_ms", static_cast<long>(c.initial_backoff.count())));
        c.max_in_flight = spec.value("max_in_flight", c.max_in_flight);
        const std::string style = spec.value("api_style", std::string("chat"));
        if (style == "chat") {
            c.api_style = ApiStyle::kChat;
        } else if (style == "completion") {
            c.api_style = ApiStyle::kCompletion;
        } else {
            throw ConfigError("api_style must be 'chat' or 'completion'");
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("remote backend config: ") + e.what());
    }
    // Environment overrides win over file settings.
    c.apply_env();
    c.validate();
    return c;
}

BackendProvider scripted_provider(const std::string& path) {
    json j;
    try {
        j = json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw SyntaxError(e.byte, "script '" + path + "': " + e.what());
    }
    if (!j.is_object()) throw ConfigError("script '" + path + "' must be a JSON object");
    try {
        if (auto it = j.find("by_hash"); it != j.end()) {
            auto shared = std::make_shared<ScriptedBackend>(it->get<std::map<std::string, std::string>>());
            return [shared](const std::string&) { return shared; };
        }
        if (auto it = j.find("completions"); it != j.end()) {
            auto seq = it->get<std::vector<std::string>>();
            return [seq](const std::string&) { return std::make_shared<ScriptedBackend>(seq); };
        }
        if (auto it = j.find("dialogs"); it != j.end()) {
            auto by_key = it->get<std::map<std::string, std::vector<std::string>>>();
            return [by_key, path](const std::string& key) -> std::shared_ptr<LlmBackend> {
                auto found = by_key.find(key);
                if (found == by_key.end()) throw ConfigError("script '" + path + "' has no entry for '" + key + "'");
                return std::make_shared<ScriptedBackend>(found->second);
            };
        }
    } catch (const json::exception& e) {
        throw ConfigError("script '" + path + "': " + e.what());
    }
    throw ConfigError("script '" + path + "' needs 'completions', 'by_hash' or 'dialogs'");
}

}  // namespace

BackendProvider make_backend_provider(const json& spec, const std::string& base_dir) {
    std::string type;
    std::string arg;
    if (spec.is_string()) {
        const std::string s = spec.get<std::string>();
        const std::size_t colon = s.find(':');
        type = s.substr(0, colon);
        if (colon != std::string::npos) arg = s.substr(colon + 1);
    } else if (spec.is_object()) {
        type = spec.value("type", std::string());
        arg = spec.value("path", std::string());
    } else {
        throw ConfigError("backend must be a string or an object");
    }

    if (type == "keyword") {
        const double threshold = spec.is_object() ? spec.value("threshold", 0.3) : 0.3;
        auto shared = std::make_shared<KeywordBackend>(threshold);
        return [shared](const std::string&) { return shared; };
    }
    if (type == "scripted") {
        if (arg.empty()) throw ConfigError("scripted backend needs a script path");
        return scripted_provider(resolve_path(base_dir, arg));
    }
    if (type == "remote") {
        auto shared = std::make_shared<RemoteBackend>(remote_config(spec));
        return [shared](const std::string&) { return shared; };
    }
    throw ConfigError("unknown backend type '" + type + "'");
}

}  // namespace schemabot
