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
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "schemabot/belief.hpp"
#include "schemabot/dbkit.hpp"
#include "schemabot/llm.hpp"
#include "schemabot/policy.hpp"
#include "schemabot/schema.hpp"

namespace schemabot {

struct PipelineConfig {
    // Ablation switches.
    bool use_dst_prompter = true;
    bool use_db = true;
    bool use_policy_prompter = true;
    // One policy call returning both "Action:" and "Response:" lines.
    bool combined_action_response = false;
    std::size_t db_summary_k = 1;
    // Extra attempts after an unparseable completion, re-issuing the same prompt.
    int parse_retry_budget = 2;
    // Oldest user/system pairs beyond this many user turns are dropped from prompts.
    std::size_t history_turn_cap = 20;
    // Record system turns in the history as delexicalized text rather than the final reply.
    bool delex_history = false;
    std::string out_of_scope_response = "Sorry, I can only help with the tasks I was set up for.";
    std::string dst_formatting_example;
    std::string policy_formatting_example;
};

// Immutable engine state shared by all sessions.
struct Engine {
    std::vector<TaskSchema> schemas;
    std::map<std::string, DbTable> dbs;  // by domain
    Canonicalizer canon;
    PipelineConfig config;

    const TaskSchema* schema(std::string_view domain) const;
    const DbTable* db(std::string_view domain) const;
};

struct StagePrompt {
    std::string stage;  // "dst", "action", "response", "combined"
    std::string prompt;
    std::string completion;
    int retries = 0;
};

struct StageTiming {
    std::string stage;
    std::chrono::microseconds duration{0};
};

struct LexResult {
    std::string text;
    bool unresolved = false;
};

struct TurnRecord {
    std::string user;
    BeliefState belief;
    std::string belief_sql;
    bool db_enabled = true;
    std::size_t db_count = 0;
    std::optional<DbEntry> db_top;
    std::string db_summary;
    SystemAction action;
    DelexResponse delex;
    std::string final_text;
    bool unresolved = false;
    std::vector<StagePrompt> prompts;
    std::vector<StageTiming> timings;
    int parse_retries = 0;
    bool degraded = false;
    std::vector<std::string> failures;
    int prompt_tokens = 0;
    int completion_tokens = 0;
};

nlohmann::json to_json(const TurnRecord& r, bool include_timings = true);

struct DialogSession {
    std::string id;
    std::shared_ptr<const Engine> engine;
    std::shared_ptr<LlmBackend> backend;
    std::vector<TaskSchema> schemas;  // bound subset, in prompt order
    DialogHistory history;
    std::vector<TurnRecord> records;
    std::string active_domain;
    bool closed = false;
};

// Binds `schema_ids` (all engine schemas when empty). Throws UnknownDomain.
DialogSession open_session(std::shared_ptr<const Engine> engine, std::shared_ptr<LlmBackend> backend,
                           const std::vector<std::string>& schema_ids = {}, std::string id = {});

std::string new_session_id();

// Runs one full turn. `forced_belief` skips the DST call (gold-belief teacher forcing).
// On a backend error the session is left exactly as before the call.
const TurnRecord& step(DialogSession& session, std::string_view user_utterance,
                       const std::optional<BeliefState>& forced_belief = std::nullopt);

// Fills placeholders from db.top, then belief values, then the reserved count
// tokens. `placeholder_to_slot` maps tokens to slot names; tokens missing from
// it resolve as "value_<slot>" -> slot, or the token itself.
LexResult lexicalize(const DelexResponse& delex, const DbState& db, const BeliefState& belief,
                     const std::map<std::string, std::string>& placeholder_to_slot = {});

}  // namespace schemabot
