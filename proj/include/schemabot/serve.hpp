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

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <string>

#include <nlohmann/json.hpp>

#include "schemabot/config.hpp"
#include "schemabot/pipeline.hpp"

namespace schemabot {

// Error codes a client may see in an ApiError body.
inline const std::set<std::string> kApiErrorCodes = {
    "bad_request",    "invalid_json",  "unauthorized",  "not_found",     "session_not_found", "unknown_schema",
    "session_closed", "turn_in_progress", "backend_error", "backend_timeout", "backend_auth",  "internal"};

struct ApiError {
    int status = 500;
    std::string code;
    std::string message;
    nlohmann::json detail;  // null when absent

    nlohmann::json body() const;
};

struct ApiReply {
    int status = 200;
    nlohmann::json body;
};

// Session store and request handlers, independent of the HTTP transport.
class ChatService {
  public:
    ChatService(std::shared_ptr<const Engine> engine, BackendProvider backends, ServeOptions options = {});

    ApiReply create_session(const nlohmann::json& body);
    ApiReply post_message(const std::string& session_id, const nlohmann::json& body);
    ApiReply get_session(const std::string& session_id);
    ApiReply close_session(const std::string& session_id);
    ApiReply list_schemas() const;
    ApiReply health() const;

    // Rebuilds sessions from a persistence log. Returns the number restored.
    std::size_t restore(const std::string& log_path);

    const ServeOptions& options() const { return options_; }

  private:
    struct Slot {
        std::mutex turn;
        DialogSession session;
    };

    std::shared_ptr<Slot> find(const std::string& id) const;
    void append_log(const nlohmann::json& event);

    std::shared_ptr<const Engine> engine_;
    BackendProvider backends_;
    ServeOptions options_;
    mutable std::mutex store_mu_;
    std::map<std::string, std::shared_ptr<Slot>> sessions_;
    std::mutex log_mu_;
};

// HTTP front end for a ChatService.
class HttpServer {
  public:
    explicit HttpServer(std::shared_ptr<ChatService> service);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    // Port 0 picks a free port. Returns the bound port; throws BindFailure.
    int bind(const std::string& host, int port);
    // Blocks until stop().
    void listen();
    // Blocks until a concurrent listen() accepts connections.
    void wait_until_ready();
    void stop();

  private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace schemabot
