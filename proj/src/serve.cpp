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

#include "schemabot/serve.hpp"

#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <httplib.h>

#include "schemabot/text.hpp"

namespace schemabot {

using nlohmann::json;

json ApiError::body() const {
    json j{{"error", {{"code", code}, {"message", message}}}};
    if (!detail.is_null()) j["error"]["detail"] = detail;
    return j;
}

namespace {

ApiReply fail(int status, std::string code, std::string message, json detail = nullptr) {
    return {status, ApiError{status, std::move(code), std::move(message), std::move(detail)}.body()};
}

json belief_object(const BeliefState& b) {
    json pairs = json::object();
    for (const auto& [slot, value] : b.pairs) pairs[slot] = value;
    return pairs;
}

json message_reply(const DialogSession& s, const TurnRecord& r) {
    return json{{"session_id", s.id},
                {"turn", s.records.size()},
                {"belief_sql", r.belief_sql},
                {"domain", r.belief.domain},
                {"belief", belief_object(r.belief)},
                {"db_enabled", r.db_enabled},
                {"db_count", r.db_count},
                {"action", r.action.labels},
                {"delex", r.delex.text},
                {"response", r.final_text},
                {"unresolved", r.unresolved},
                {"degraded", r.degraded},
                {"parse_retries", r.parse_retries}};
}

std::vector<std::string> schema_ids(const DialogSession& s) {
    std::vector<std::string> ids;
    for (const auto& schema : s.schemas) ids.push_back(schema.domain);
    return ids;
}

// Inverse of to_json(TurnRecord) for the fields needed to resume a session.
TurnRecord record_from_json(const json& j) {
    TurnRecord r;
    r.user = j.at("user").get<std::string>();
    r.belief_sql = j.value("belief_sql", std::string());
    r.belief = parse_belief_sql_unchecked(r.belief_sql);
    if (r.belief.domain.empty()) r.belief.domain = j.value("domain", std::string());
    r.db_enabled = j.value("db_enabled", true);
    r.db_count = j.value("db_count", std::size_t{0});
    r.db_summary = j.value("db_summary", std::string());
    if (auto top = j.find("db_top"); top != j.end() && top->is_object()) {
        r.db_top = DbEntry{r.belief.domain, top->get<std::map<std::string, std::string>>()};
    }
    r.action.labels = j.value("action", std::vector<std::string>{});
    r.delex.text = j.value("delex", std::string());
    r.final_text = j.value("response", std::string());
    r.unresolved = j.value("unresolved", false);
    r.parse_retries = j.value("parse_retries", 0);
    r.degraded = j.value("degraded", false);
    r.failures = j.value("failures", std::vector<std::string>{});
    for (const auto& p : j.value("prompts", json::array())) {
        r.prompts.push_back({p.value("stage", std::string()), p.value("prompt", std::string()),
                             p.value("completion", std::string()), p.value("retries", 0)});
    }
    return r;
}

}  // namespace

ChatService::ChatService(std::shared_ptr<const Engine> engine, BackendProvider backends, ServeOptions options)
    : engine_(std::move(engine)), backends_(std::move(backends)), options_(std::move(options)) {
    if (!engine_ || engine_->schemas.empty()) throw ConfigError("service needs at least one schema");
    if (!backends_) throw ConfigError("service needs a backend");
}

std::shared_ptr<ChatService::Slot> ChatService::find(const std::string& id) const {
    std::lock_guard lock(store_mu_);
    auto it = sessions_.find(id);
    return it == sessions_.end() ? nullptr : it->second;
}

void ChatService::append_log(const json& event) {
    if (options_.log_path.empty()) return;
    std::lock_guard lock(log_mu_);
    std::ofstream out(options_.log_path, std::ios::app | std::ios::binary);
    out << event.dump() << '\n';
}

ApiReply ChatService::create_session(const json& body) {
    std::vector<std::string> ids;
    if (!body.is_null()) {
        if (!body.is_object()) return fail(400, "bad_request", "request body must be a JSON object");
        if (auto it = body.find("schema_ids"); it != body.end() && !it->is_null()) {
            if (!it->is_array()) return fail(400, "bad_request", "schema_ids must be an array of strings");
            for (const auto& v : *it) {
                if (!v.is_string()) return fail(400, "bad_request", "schema_ids must be an array of strings");
                ids.push_back(v.get<std::string>());
            }
        }
    }
    auto slot = std::make_shared<Slot>();
    const std::string id = new_session_id();
    try {
        slot->session = open_session(engine_, backends_(id), ids, id);
    } catch (const UnknownDomain& e) {
        return fail(400, "unknown_schema", e.what(), json{{"schema_ids", ids}});
    } catch (const ConfigError& e) {
        return fail(500, "backend_error", e.what());
    }
    {
        std::lock_guard lock(store_mu_);
        sessions_[id] = slot;
    }
    append_log({{"event", "open"}, {"session_id", id}, {"schema_ids", schema_ids(slot->session)}});
    return {201, json{{"session_id", id}, {"schema_ids", schema_ids(slot->session)}}};
}

ApiReply ChatService::post_message(const std::string& session_id, const json& body) {
    auto slot = find(session_id);
    if (!slot) return fail(404, "session_not_found", "no session '" + session_id + "'");
    if (!body.is_object() || !body.contains("text") || !body["text"].is_string()) {
        return fail(400, "bad_request", "body must be {\"text\": string}");
    }
    const std::string text = body["text"].get<std::string>();
    if (text::trim(text).empty()) return fail(400, "bad_request", "text is empty");

    std::unique_lock turn(slot->turn, std::try_to_lock);
    if (!turn.owns_lock()) return fail(409, "turn_in_progress", "session is processing another message");
    DialogSession& s = slot->session;
    if (s.closed) return fail(409, "session_closed", "session '" + session_id + "' is closed");
    try {
        const TurnRecord& rec = step(s, text);
        append_log({{"event", "turn"}, {"session_id", session_id}, {"record", to_json(rec, false)}});
        return {200, message_reply(s, rec)};
    } catch (const AuthFailure& e) {
        return fail(502, "backend_auth", e.what());
    } catch (const Timeout& e) {
        return fail(504, "backend_timeout", e.what());
    } catch (const BackendError& e) {
        return fail(502, "backend_error", e.what(), json{{"kind", e.code()}});
    } catch (const SessionClosed& e) {
        return fail(409, "session_closed", e.what());
    } catch (const InvalidArgument& e) {
        return fail(400, "bad_request", e.what());
    }
}

ApiReply ChatService::get_session(const std::string& session_id) {
    auto slot = find(session_id);
    if (!slot) return fail(404, "session_not_found", "no session '" + session_id + "'");
    std::unique_lock turn(slot->turn, std::try_to_lock);
    if (!turn.owns_lock()) return fail(409, "turn_in_progress", "session is processing a message");
    const DialogSession& s = slot->session;
    json turns = json::array();
    for (const auto& r : s.records) turns.push_back(to_json(r, true));
    return {200, json{{"session_id", s.id},
                      {"schema_ids", schema_ids(s)},
                      {"active_domain", s.active_domain},
                      {"closed", s.closed},
                      {"turns", std::move(turns)}}};
}

ApiReply ChatService::close_session(const std::string& session_id) {
    auto slot = find(session_id);
    if (!slot) return fail(404, "session_not_found", "no session '" + session_id + "'");
    std::unique_lock turn(slot->turn, std::try_to_lock);
    if (!turn.owns_lock()) return fail(409, "turn_in_progress", "session is processing a message");
    slot->session.closed = true;
    append_log({{"event", "close"}, {"session_id", session_id}});
    return {200, json{{"session_id", session_id}, {"closed", true}}};
}

ApiReply ChatService::list_schemas() const {
    json out = json::array();
    for (const auto& s : engine_->schemas) {
        json slots = json::array();
        for (const auto& slot : s.belief.slots) slots.push_back(slot.name);
        out.push_back({{"id", s.domain}, {"slots", std::move(slots)}, {"template_turns", s.policy.turns.size()},
                       {"has_db", engine_->db(s.domain) != nullptr}});
    }
    return {200, json{{"schemas", std::move(out)}}};
}

ApiReply ChatService::health() const {
    std::size_t n;
    {
        std::lock_guard lock(store_mu_);
        n = sessions_.size();
    }
    return {200, json{{"status", "ok"}, {"sessions", n}, {"schemas", engine_->schemas.size()}}};
}

std::size_t ChatService::restore(const std::string& log_path) {
    std::ifstream in(log_path, std::ios::binary);
    if (!in) return 0;
    std::map<std::string, std::shared_ptr<Slot>> restored;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (text::trim(line).empty()) continue;
        json ev;
        try {
            ev = json::parse(line);
        } catch (const json::parse_error&) {
            // A torn final line after a crash is expected; anything earlier is not.
            if (in.peek() == std::char_traits<char>::eof()) break;
            throw SyntaxError(0, "session log line " + std::to_string(line_no) + " is not JSON");
        }
        const std::string event = ev.value("event", std::string());
        const std::string id = ev.value("session_id", std::string());
        if (event == "open") {
            auto slot = std::make_shared<Slot>();
            slot->session = open_session(engine_, backends_(id), ev.value("schema_ids", std::vector<std::string>{}), id);
            restored[id] = slot;
            continue;
        }
        auto it = restored.find(id);
        if (it == restored.end()) continue;
        DialogSession& s = it->second->session;
        if (event == "turn") {
            TurnRecord r = record_from_json(ev.at("record"));
            s.history.turns.push_back({Speaker::kUser, r.user});
            const std::string& said = engine_->config.delex_history ? r.delex.text : r.final_text;
            s.history.turns.push_back({Speaker::kSystem, said.empty() ? std::string("...") : said});
            if (!r.belief.domain.empty()) s.active_domain = r.belief.domain;
            s.records.push_back(std::move(r));
        } else if (event == "close") {
            s.closed = true;
        }
    }
    std::lock_guard lock(store_mu_);
    for (auto& [id, slot] : restored) sessions_[id] = slot;
    return restored.size();
}

// ---- HTTP -------------------------------------------------------------------

struct HttpServer::Impl {
    std::shared_ptr<ChatService> service;
    httplib::Server server;
    std::atomic<long> request_counter{0};
    std::string token;
};

namespace {

void send(httplib::Response& res, const ApiReply& reply) {
    res.status = reply.status;
    res.set_content(reply.body.dump(), "application/json; charset=utf-8");
}

}  // namespace

HttpServer::HttpServer(std::shared_ptr<ChatService> service) : impl_(std::make_unique<Impl>()) {
    impl_->service = std::move(service);
    const ServeOptions& opt = impl_->service->options();
    if (!opt.bearer_token_env.empty()) {
        const char* tok = std::getenv(opt.bearer_token_env.c_str());
        if (!tok || !*tok) throw ConfigError("bearer token variable " + opt.bearer_token_env + " is not set");
        impl_->token = tok;
    }
    const std::size_t threads = std::max<std::size_t>(opt.max_threads, 2);
    impl_->server.new_task_queue = [threads] { return new httplib::ThreadPool(threads); };

    Impl* impl = impl_.get();
    const std::string cors = opt.cors_origin;

    impl->server.set_pre_routing_handler([impl, cors](const httplib::Request& req, httplib::Response& res) {
        std::string rid = req.get_header_value("X-Request-Id");
        if (rid.empty()) {
            std::ostringstream os;
            os << "req-" << std::setw(6) << std::setfill('0') << ++impl->request_counter;
            rid = os.str();
        }
        res.set_header("X-Request-Id", rid);
        if (!cors.empty()) {
            res.set_header("Access-Control-Allow-Origin", cors);
            res.set_header("Access-Control-Allow-Headers", "Content-Type, Authorization, X-Request-Id");
            res.set_header("Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS");
            res.set_header("Access-Control-Expose-Headers", "X-Request-Id");
        }
        if (req.method == "OPTIONS") {
            res.status = 204;
            return httplib::Server::HandlerResponse::Handled;
        }
        if (!impl->token.empty() && req.path != "/v1/health" &&
            req.get_header_value("Authorization") != "Bearer " + impl->token) {
            send(res, fail(401, "unauthorized", "missing or wrong bearer token"));
            return httplib::Server::HandlerResponse::Handled;
        }
        return httplib::Server::HandlerResponse::Unhandled;
    });

    auto parse_body = [](const httplib::Request& req, json& out) -> std::optional<ApiReply> {
        if (text::trim(req.body).empty()) {
            out = nullptr;
            return std::nullopt;
        }
        try {
            out = json::parse(req.body);
        } catch (const json::parse_error& e) {
            return fail(400, "invalid_json", "request body is not valid JSON", json{{"byte", e.byte}});
        }
        return std::nullopt;
    };

    auto& svr = impl->server;
    svr.Post("/v1/sessions", [impl, parse_body](const httplib::Request& req, httplib::Response& res) {
        json body;
        if (auto err = parse_body(req, body)) return send(res, *err);
        send(res, impl->service->create_session(body));
    });
    svr.Post(R"(/v1/sessions/([^/]+)/messages)", [impl, parse_body](const httplib::Request& req, httplib::Response& res) {
        json body;
        if (auto err = parse_body(req, body)) return send(res, *err);
        send(res, impl->service->post_message(req.matches[1], body));
    });
    svr.Get(R"(/v1/sessions/([^/]+))", [impl](const httplib::Request& req, httplib::Response& res) {
        send(res, impl->service->get_session(req.matches[1]));
    });
    svr.Delete(R"(/v1/sessions/([^/]+))", [impl](const httplib::Request& req, httplib::Response& res) {
        send(res, impl->service->close_session(req.matches[1]));
    });
    svr.Get("/v1/schemas", [impl](const httplib::Request&, httplib::Response& res) {
        send(res, impl->service->list_schemas());
    });
    svr.Get("/v1/health", [impl](const httplib::Request&, httplib::Response& res) {
        send(res, impl->service->health());
    });
    // Plain SO_REUSEADDR: a port already in use must fail to bind.
    svr.set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof(yes));
    });
    svr.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
        if (res.status == 404 && res.body.empty()) {
            send(res, fail(404, "not_found", "no route for " + req.method + " " + req.path));
        }
    });
    svr.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string what = "unknown error";
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            what = e.what();
        } catch (...) {
        }
        send(res, fail(500, "internal", what));
    });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    if (port == 0) {
        const int bound = impl_->server.bind_to_any_port(host);
        if (bound <= 0) throw BindFailure("cannot bind to " + host);
        return bound;
    }
    if (!impl_->server.bind_to_port(host, port)) {
        throw BindFailure("cannot bind to " + host + ":" + std::to_string(port));
    }
    return port;
}

void HttpServer::listen() { impl_->server.listen_after_bind(); }

void HttpServer::wait_until_ready() { impl_->server.wait_until_ready(); }

void HttpServer::stop() {
    if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace schemabot
