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

#include "schemabot/pipeline.hpp"

#include <functional>
#include <iomanip>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "schemabot/text.hpp"

namespace schemabot {

using nlohmann::json;

const TaskSchema* Engine::schema(std::string_view domain) const { return find_schema(schemas, domain); }

const DbTable* Engine::db(std::string_view domain) const {
    auto it = dbs.find(std::string(domain));
    return it == dbs.end() ? nullptr : &it->second;
}

std::string new_session_id() {
    static thread_local std::mt19937_64 rng{std::random_device{}()};
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << rng();
    return os.str();
}

DialogSession open_session(std::shared_ptr<const Engine> engine, std::shared_ptr<LlmBackend> backend,
                           const std::vector<std::string>& schema_ids, std::string id) {
    if (!engine) throw InvalidArgument("session requires an engine");
    if (!backend) throw InvalidArgument("session requires an LLM backend");
    DialogSession s;
    s.id = id.empty() ? new_session_id() : std::move(id);
    if (schema_ids.empty()) {
        s.schemas = engine->schemas;
    } else {
        for (const auto& sid : schema_ids) {
            const TaskSchema* schema = engine->schema(text::canonical_identifier(sid));
            if (!schema) throw UnknownDomain("no schema with id '" + sid + "'");
            s.schemas.push_back(*schema);
        }
    }
    if (s.schemas.empty()) throw EmptySchemaSet("the engine has no schemas");
    s.active_domain = s.schemas.front().domain;
    s.engine = std::move(engine);
    s.backend = std::move(backend);
    return s;
}

json to_json(const TurnRecord& r, bool include_timings) {
    json prompts = json::array();
    for (const auto& p : r.prompts) {
        prompts.push_back({{"stage", p.stage}, {"prompt", p.prompt}, {"completion", p.completion}, {"retries", p.retries}});
    }
    json j{{"user", r.user},
           {"belief_sql", r.belief_sql},
           {"domain", r.belief.domain},
           {"db_enabled", r.db_enabled},
           {"db_count", r.db_count},
           {"db_summary", r.db_summary},
           {"db_top", r.db_top ? json(r.db_top->attributes) : json(nullptr)},
           {"action", r.action.labels},
           {"delex", r.delex.text},
           {"response", r.final_text},
           {"unresolved", r.unresolved},
           {"prompts", std::move(prompts)},
           {"parse_retries", r.parse_retries},
           {"degraded", r.degraded},
           {"failures", r.failures},
           {"usage", {{"prompt_tokens", r.prompt_tokens}, {"completion_tokens", r.completion_tokens}}}};
    if (include_timings) {
        json t = json::object();
        for (const auto& s : r.timings) t[s.stage] = static_cast<double>(s.duration.count()) / 1000.0;
        j["timings_ms"] = std::move(t);
    }
    return j;
}

namespace {

DialogHistory capped(const DialogHistory& h, std::size_t cap) {
    if (cap == 0) return h;
    std::size_t users = 0;
    std::size_t start = h.turns.size();
    while (start > 0) {
        if (h.turns[start - 1].speaker == Speaker::kUser) {
            if (users == cap) break;
            ++users;
        }
        --start;
    }
    DialogHistory out;
    out.turns.assign(h.turns.begin() + static_cast<std::ptrdiff_t>(start), h.turns.end());
    return out;
}

// Calls the backend, parsing each completion; re-issues the same prompt on
// unparseable output up to the retry budget. Returns false once exhausted.
bool run_stage(DialogSession& session, TurnRecord& rec, const std::string& stage, const std::string& prompt,
               const std::function<void(const std::string&)>& parse) {
    const int budget = std::max(0, session.engine->config.parse_retry_budget);
    const auto start = std::chrono::steady_clock::now();
    StagePrompt sp{stage, prompt, {}, 0};
    bool ok = false;
    for (int attempt = 0; attempt <= budget; ++attempt) {
        if (attempt > 0) {
            ++rec.parse_retries;
            ++sp.retries;
        }
        CompletionResult res = complete(*session.backend, CompletionRequest{prompt, {}, {}});
        rec.prompt_tokens += res.prompt_tokens;
        rec.completion_tokens += res.completion_tokens;
        sp.completion = res.text;
        try {
            parse(res.text);
            ok = true;
            break;
        } catch (const BackendError&) {
            throw;
        } catch (const Error& e) {
            rec.failures.push_back(stage + ": " + e.what());
        }
    }
    rec.prompts.push_back(std::move(sp));
    rec.timings.push_back({stage, std::chrono::duration_cast<std::chrono::microseconds>(
                                      std::chrono::steady_clock::now() - start)});
    if (!ok) rec.degraded = true;
    return ok;
}

struct Fallback {
    SystemAction action;
    DelexResponse response;
};

Fallback fallback_for(const TaskSchema* schema, const PipelineConfig& cfg) {
    if (schema) {
        if (const TemplateTurn* t = schema->policy.find(kFallbackTurnId)) {
            return {make_action(t->action), DelexResponse{t->response}};
        }
    }
    return {make_action("fallback"), DelexResponse{cfg.out_of_scope_response}};
}

}  // namespace

const TurnRecord& step(DialogSession& session, std::string_view user_utterance,
                       const std::optional<BeliefState>& forced_belief) {
    if (session.closed) throw SessionClosed("session '" + session.id + "' is closed");
    const std::string utterance(text::trim(user_utterance));
    if (utterance.empty()) throw InvalidArgument("user utterance is empty");
    const Engine& eng = *session.engine;
    const PipelineConfig& cfg = eng.config;

    TurnRecord rec;
    rec.user = utterance;
    session.history.turns.push_back({Speaker::kUser, utterance});
    try {
        const DialogHistory history = capped(session.history, cfg.history_turn_cap);

        BeliefState belief{session.active_domain, {}};
        if (forced_belief) {
            check_belief(*forced_belief, session.schemas);
            belief = *forced_belief;
        } else if (cfg.use_dst_prompter) {
            const DstPrompt p = build_dst_prompt(session.schemas, history, cfg.dst_formatting_example);
            run_stage(session, rec, "dst", p.render(), [&](const std::string& completion) {
                belief = parse_belief_sql(completion, session.schemas, eng.canon);
            });
        }
        rec.belief = belief;
        rec.belief_sql = render_belief_sql(belief);

        const TaskSchema* schema = find_schema(session.schemas, belief.domain);
        DbState db;
        if (cfg.use_db) {
            if (const DbTable* table = eng.db(belief.domain)) db = query(*table, belief, eng.canon);
            rec.db_summary = summarize(db, cfg.db_summary_k, schema);
        } else {
            rec.db_enabled = false;
        }
        rec.db_count = db.count();
        if (const DbEntry* top = db.top()) rec.db_top = *top;

        const Fallback fb = fallback_for(schema, cfg);
        if (!schema) {
            rec.action = fb.action;
            rec.delex = fb.response;
            rec.degraded = true;
        } else {
            auto prompt_for = [&](PolicyStage stage, const std::optional<SystemAction>& action) {
                PolicyPrompt p = build_policy_prompt(*schema, history, belief, rec.db_summary,
                                                     cfg.policy_formatting_example, stage, action);
                if (!cfg.use_policy_prompter) p.skeleton_rendering.clear();
                return p.render();
            };
            if (cfg.combined_action_response) {
                const bool ok = run_stage(session, rec, "combined", prompt_for(PolicyStage::kCombined, std::nullopt),
                                          [&](const std::string& completion) {
                                              SystemAction a = parse_action(completion);
                                              DelexResponse r = parse_response(completion);
                                              rec.action = std::move(a);
                                              rec.delex = std::move(r);
                                          });
                if (!ok) {
                    rec.action = fb.action;
                    rec.delex = fb.response;
                }
            } else {
                const bool action_ok =
                    run_stage(session, rec, "action", prompt_for(PolicyStage::kAction, std::nullopt),
                              [&](const std::string& completion) { rec.action = parse_action(completion); });
                if (!action_ok) {
                    rec.action = fb.action;
                    rec.delex = fb.response;
                } else {
                    const bool response_ok =
                        run_stage(session, rec, "response", prompt_for(PolicyStage::kResponse, rec.action),
                                  [&](const std::string& completion) { rec.delex = parse_response(completion); });
                    if (!response_ok) rec.delex = fb.response;
                }
            }
        }

        const LexResult lex =
            lexicalize(rec.delex, db, belief, schema ? schema->placeholder_map() : std::map<std::string, std::string>{});
        rec.final_text = lex.text;
        rec.unresolved = lex.unresolved;
    } catch (...) {
        session.history.turns.pop_back();
        throw;
    }

    const std::string& said = cfg.delex_history ? rec.delex.text : rec.final_text;
    session.history.turns.push_back({Speaker::kSystem, said.empty() ? std::string("...") : said});
    session.active_domain = rec.belief.domain;
    session.records.push_back(std::move(rec));
    return session.records.back();
}

LexResult lexicalize(const DelexResponse& delex, const DbState& db, const BeliefState& belief,
                     const std::map<std::string, std::string>& placeholder_to_slot) {
    LexResult out;
    const std::string& s = delex.text;
    std::size_t i = 0;
    while (i < s.size()) {
        const std::size_t open = s.find('[', i);
        if (open == std::string::npos) {
            out.text.append(s, i, std::string::npos);
            break;
        }
        const std::size_t close = s.find(']', open + 1);
        const std::size_t nested = s.find('[', open + 1);
        if (close == std::string::npos || (nested != std::string::npos && nested < close)) {
            // Not a well-formed placeholder; copy through and flag.
            out.text.append(s, i, open + 1 - i);
            out.unresolved = true;
            i = open + 1;
            continue;
        }
        out.text.append(s, i, open - i);
        const std::string token = text::to_lower(s.substr(open + 1, close - open - 1));
        std::string slot;
        if (auto it = placeholder_to_slot.find(token); it != placeholder_to_slot.end()) {
            slot = it->second;
        } else if (token.starts_with("value_")) {
            slot = token.substr(6);
        } else {
            slot = token;
        }

        const std::string* value = nullptr;
        std::string count_text;
        if (const DbEntry* top = db.top()) value = top->get(slot);
        if (!value) value = belief.find(slot);
        if (!value && (token == kValueCountToken || token == kChoiceToken)) {
            count_text = std::to_string(db.count());
            value = &count_text;
        }
        if (value) {
            out.text += *value;
        } else {
            out.text.append(s, open, close - open + 1);
            out.unresolved = true;
        }
        i = close + 1;
    }
    return out;
}

}  // namespace schemabot
