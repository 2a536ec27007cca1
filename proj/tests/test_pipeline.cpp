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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <nlohmann/json.hpp>

#include "schemabot/pipeline.hpp"
#include "schemabot/text.hpp"
#include "support.hpp"

using namespace schemabot;
using testing::Gen;

namespace {

std::shared_ptr<Engine> engine_with(const std::function<void(PipelineConfig&)>& tweak = {}) {
    auto e = std::make_shared<Engine>(*testing::load_engine());
    if (tweak) tweak(e->config);
    return e;
}

std::shared_ptr<ScriptedBackend> script(std::vector<std::string> items) {
    return std::make_shared<ScriptedBackend>(std::move(items));
}

const std::vector<std::string> kKoreanTurn = {
    "select * from restaurant where food = korean",
    "Action: inform_name_phone",
    "Response: [value_name] is a [value_food] restaurant. Their phone number is [value_phone].",
    "unused",
};

std::vector<std::string> stages(const TurnRecord& r) {
    std::vector<std::string> out;
    for (const auto& p : r.prompts) out.push_back(p.stage);
    return out;
}

}  // namespace

TEST_CASE("one turn: korean food yields the Little Seoul reply") {
    auto backend = script(kKoreanTurn);
    DialogSession s = open_session(engine_with(), backend, {"restaurant"});
    const TurnRecord& r = step(s, "i want korean food");
    CHECK(r.belief == BeliefState{"restaurant", {{"food", "korean"}}});
    CHECK(r.belief_sql == "select * from restaurant where food = korean");
    CHECK(r.db_count >= 1);
    CHECK(r.db_summary.rfind(std::to_string(r.db_count) + " matching", 0) == 0);
    CHECK(r.action.labels == std::vector<std::string>{"inform_name_phone"});
    CHECK(r.final_text == "Little Seoul is a korean restaurant. Their phone number is 01223308681.");
    CHECK_FALSE(r.unresolved);
    CHECK_FALSE(r.degraded);
    CHECK(r.parse_retries == 0);
    CHECK(backend->calls() == 3);

    // Session state reflects the record.
    REQUIRE(s.history.turns.size() == 2);
    CHECK(s.history.turns[0] == Turn{Speaker::kUser, "i want korean food"});
    CHECK(s.history.turns[1] == Turn{Speaker::kSystem, r.final_text});
    CHECK(s.records.size() == 1);
    CHECK(s.active_domain == "restaurant");

    // Recorded prompts are exactly what the backend saw.
    const auto seen = backend->prompts();
    REQUIRE(r.prompts.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(r.prompts[i].prompt == seen[i]);
}

TEST_CASE("stage order: separate and combined") {
    auto backend = script(kKoreanTurn);
    DialogSession s = open_session(engine_with(), backend, {"restaurant"});
    CHECK(stages(step(s, "i want korean food")) == std::vector<std::string>{"dst", "action", "response"});

    auto combined = engine_with([](PipelineConfig& c) { c.combined_action_response = true; });
    auto b2 = script({kKoreanTurn[0], "Action: inform_name_phone\nResponse: [value_name] it is."});
    DialogSession s2 = open_session(combined, b2, {"restaurant"});
    const TurnRecord& r2 = step(s2, "i want korean food");
    CHECK(stages(r2) == std::vector<std::string>{"dst", "combined"});
    CHECK(r2.final_text == "Little Seoul it is.");
    CHECK(b2->calls() == 2);
}

TEST_CASE("without the DST prompter the belief is empty and the DB returns everything") {
    auto e = engine_with([](PipelineConfig& c) { c.use_dst_prompter = false; });
    auto backend = script({"Action: greet", "Response: hello"});
    DialogSession s = open_session(e, backend, {"restaurant"});
    const TurnRecord& r = step(s, "i want korean food");
    CHECK(r.belief == BeliefState{"restaurant", {}});
    CHECK(r.db_count == e->db("restaurant")->entries().size());
    CHECK(stages(r) == std::vector<std::string>{"action", "response"});
}

TEST_CASE("without the DB the policy prompt has no DB line") {
    auto e = engine_with([](PipelineConfig& c) { c.use_db = false; });
    auto backend = script(kKoreanTurn);
    DialogSession s = open_session(e, backend, {"restaurant"});
    const TurnRecord& r = step(s, "i want korean food");
    CHECK_FALSE(r.db_enabled);
    CHECK(r.db_count == 0);
    CHECK_FALSE(r.db_top);
    const std::string& prompt = r.prompts[1].prompt;
    CHECK(prompt.find("DB state:", prompt.find("Test input:")) == std::string::npos);
    // Name and phone cannot be filled without an entry; food comes from the belief.
    CHECK(r.final_text == "[value_name] is a korean restaurant. Their phone number is [value_phone].");
    CHECK(r.unresolved);
}

TEST_CASE("without the policy prompter the skeleton is omitted") {
    auto e = engine_with([](PipelineConfig& c) { c.use_policy_prompter = false; });
    auto backend = script(kKoreanTurn);
    DialogSession s = open_session(e, backend, {"restaurant"});
    const TurnRecord& r = step(s, "i want korean food");
    CHECK(r.prompts[1].prompt.find("Policy skeleton:") == std::string::npos);
    CHECK(r.prompts[1].prompt.find("Turn one_match:") == std::string::npos);
}

TEST_CASE("unparseable belief is retried with the same prompt") {
    auto e = engine_with([](PipelineConfig& c) { c.parse_retry_budget = 1; });
    auto backend = script({"garbage text", kKoreanTurn[0], kKoreanTurn[1], kKoreanTurn[2]});
    DialogSession s = open_session(e, backend, {"restaurant"});
    const TurnRecord& r = step(s, "i want korean food");
    CHECK(r.parse_retries == 1);
    CHECK(r.prompts[0].retries == 1);
    CHECK_FALSE(r.degraded);
    CHECK(r.belief == BeliefState{"restaurant", {{"food", "korean"}}});
    REQUIRE(r.failures.size() == 1);
    CHECK(r.failures[0].rfind("dst: ", 0) == 0);
    const auto seen = backend->prompts();
    CHECK(seen[0] == seen[1]);
}

TEST_CASE("exhausted belief retries degrade to an empty belief") {
    auto e = engine_with([](PipelineConfig& c) { c.parse_retry_budget = 0; });
    auto backend = script({"select * from restaurant where stars = 5", "Action: greet", "Response: hello"});
    DialogSession s = open_session(e, backend, {"restaurant"});
    const TurnRecord& r = step(s, "hi");
    CHECK(r.degraded);
    CHECK(r.belief == BeliefState{"restaurant", {}});
    CHECK(r.final_text == "hello");
}

TEST_CASE("an unparseable action uses the fallback turn") {
    auto e = engine_with([](PipelineConfig& c) { c.parse_retry_budget = 1; });
    auto backend = script({kKoreanTurn[0], "no marker", "still none", "never used"});
    DialogSession s = open_session(e, backend, {"restaurant"});
    const TurnRecord& r = step(s, "i want korean food");
    const TemplateTurn* fb = e->schema("restaurant")->policy.find(kFallbackTurnId);
    REQUIRE(fb);
    CHECK(r.degraded);
    CHECK(r.action == make_action(fb->action));
    CHECK(r.delex.text == fb->response);
    CHECK(backend->calls() == 3);
    CHECK(stages(r) == std::vector<std::string>{"dst", "action"});
}

TEST_CASE("an unparseable response uses the fallback response") {
    auto e = engine_with([](PipelineConfig& c) { c.parse_retry_budget = 0; });
    auto backend = script({kKoreanTurn[0], kKoreanTurn[1], "Response: broken [value_name"});
    DialogSession s = open_session(e, backend, {"restaurant"});
    const TurnRecord& r = step(s, "i want korean food");
    CHECK(r.degraded);
    CHECK(r.action.labels == std::vector<std::string>{"inform_name_phone"});
    CHECK(r.delex.text == e->schema("restaurant")->policy.find(kFallbackTurnId)->response);
}

TEST_CASE("backend errors leave the session untouched") {
    auto backend = script({kKoreanTurn[0], kKoreanTurn[1], kKoreanTurn[2], kKoreanTurn[0]});
    DialogSession s = open_session(engine_with(), backend, {"restaurant"});
    step(s, "i want korean food");
    const DialogHistory before = s.history;
    CHECK_THROWS_AS(step(s, "and the address?"), ProviderError);
    CHECK(s.history == before);
    CHECK(s.records.size() == 1);
}

TEST_CASE("closed sessions and empty input") {
    DialogSession s = open_session(engine_with(), script(kKoreanTurn), {"restaurant"});
    CHECK_THROWS_AS(step(s, "   "), InvalidArgument);
    s.closed = true;
    CHECK_THROWS_AS(step(s, "hi"), SessionClosed);
}

TEST_CASE("open_session binds schemas by id") {
    auto e = engine_with();
    auto b = script({});
    CHECK(open_session(e, b).schemas.size() == e->schemas.size());
    const DialogSession s = open_session(e, b, {"Hotel", "restaurant"});
    REQUIRE(s.schemas.size() == 2);
    CHECK(s.schemas[0].domain == "hotel");
    CHECK(s.active_domain == "hotel");
    CHECK_THROWS_AS(open_session(e, b, {"spaceport"}), UnknownDomain);
    CHECK(open_session(e, b, {}, "fixed").id == "fixed");
    CHECK(new_session_id().size() == 16);
}

TEST_CASE("forced beliefs skip the DST call and are checked") {
    auto backend = script({kKoreanTurn[1], kKoreanTurn[2]});
    DialogSession s = open_session(engine_with(), backend, {"restaurant"});
    const TurnRecord& r = step(s, "i want korean food", BeliefState{"restaurant", {{"food", "korean"}}});
    CHECK(stages(r) == std::vector<std::string>{"action", "response"});
    CHECK(r.final_text.rfind("Little Seoul", 0) == 0);
    CHECK_THROWS_AS(step(s, "x", BeliefState{"restaurant", {{"stars", "4"}}}), UnknownSlot);
}

TEST_CASE("domain switches rebind the skeleton") {
    auto backend = script({"select * from hotel where area = north", "Action: request_stars",
                           "Response: how many stars?"});
    DialogSession s = open_session(engine_with(), backend, {"restaurant", "hotel"});
    const TurnRecord& r = step(s, "a hotel in the north");
    CHECK(s.active_domain == "hotel");
    CHECK(r.prompts[1].prompt.find("Policy skeleton:\n[hotel]") != std::string::npos);
}

TEST_CASE("history cap drops the oldest pairs") {
    auto e = engine_with([](PipelineConfig& c) { c.history_turn_cap = 2; });
    std::vector<std::string> items;
    for (int i = 0; i < 4; ++i) {
        items.push_back("select * from restaurant");
        items.push_back("Action: greet");
        items.push_back("Response: reply " + std::to_string(i));
    }
    auto backend = script(items);
    DialogSession s = open_session(e, backend, {"restaurant"});
    for (int i = 0; i < 4; ++i) step(s, "utterance " + std::to_string(i));
    const std::string& last_dst = s.records.back().prompts[0].prompt;
    CHECK(last_dst.find("User: utterance 1") == std::string::npos);
    CHECK(last_dst.find("User: utterance 2\nSystem: reply 2\nUser: utterance 3\n") != std::string::npos);
    CHECK(s.history.turns.size() == 8);
}

TEST_CASE("turn records serialize with every field") {
    DialogSession s = open_session(engine_with(), script(kKoreanTurn), {"restaurant"});
    const auto j = to_json(step(s, "i want korean food"));
    for (const char* key : {"user", "belief_sql", "domain", "db_enabled", "db_count", "db_summary", "db_top", "action",
                            "delex", "response", "unresolved", "prompts", "parse_retries", "degraded", "failures",
                            "usage", "timings_ms"}) {
        CHECK(j.contains(key));
    }
    CHECK_FALSE(to_json(s.records[0], false).contains("timings_ms"));
    CHECK(j["db_top"]["name"] == "Little Seoul");
}

// ---- lexicalization ---------------------------------------------------------

TEST_CASE("lexicalize examples") {
    const DbState top{{DbEntry{"restaurant", {{"name", "little seoul"}, {"food", "korean"}}}}};
    LexResult r = lexicalize(DelexResponse{"[value_name] is a [value_food] restaurant."}, top, {});
    CHECK(r.text == "little seoul is a korean restaurant.");
    CHECK_FALSE(r.unresolved);

    DbState three;
    for (int i = 0; i < 3; ++i) three.entries.push_back(DbEntry{"restaurant", {}});
    r = lexicalize(DelexResponse{"there are [value_count] options"}, three, {});
    CHECK(r.text == "there are 3 options");
    CHECK(lexicalize(DelexResponse{"[choice] of them"}, three, {}).text == "3 of them");

    r = lexicalize(DelexResponse{"[value_phone]"}, DbState{}, BeliefState{"restaurant", {}});
    CHECK(r.text == "[value_phone]");
    CHECK(r.unresolved);
}

TEST_CASE("lexicalize priority and placeholder map") {
    const DbState top{{DbEntry{"restaurant", {{"food", "thai"}, {"dish", "pad thai"}}}}};
    const BeliefState b{"restaurant", {{"food", "korean"}, {"area", "north"}}};
    CHECK(lexicalize(DelexResponse{"[value_food] in the [value_area]"}, top, b).text == "thai in the north");
    CHECK(lexicalize(DelexResponse{"try [restaurant_dish]"}, top, b, {{"restaurant_dish", "dish"}}).text ==
          "try pad thai");
    const LexResult broken = lexicalize(DelexResponse{"a [b [value_food]"}, top, b);
    CHECK(broken.text == "a [b thai");
    CHECK(broken.unresolved);
}

TEST_CASE("property: lexicalization is idempotent on resolved text") {
    Gen g(31337);
    for (int i = 0; i < 500; ++i) {
        DbState db;
        BeliefState b{"restaurant", {}};
        std::vector<std::string> slots;
        for (int k = 0; k < 4; ++k) slots.push_back("s" + std::to_string(k));
        if (g.coin()) {
            DbEntry e{"restaurant", {}};
            for (const auto& s : slots) {
                if (g.coin()) e.attributes[s] = g.word() + " " + g.word();
            }
            db.entries.push_back(e);
        }
        for (const auto& s : slots) {
            if (g.coin()) b.set(s, g.word());
        }
        std::string delex;
        const int n = g.uniform(0, 5);
        for (int k = 0; k < n; ++k) {
            delex += g.word() + " ";
            if (g.coin(0.7)) delex += "[value_" + g.pick(slots) + "] ";
            if (g.coin(0.1)) delex += "[value_count] ";
        }
        const LexResult once = lexicalize(DelexResponse{delex}, db, b);
        if (once.unresolved) continue;
        const LexResult twice = lexicalize(DelexResponse{once.text}, db, b);
        CHECK(twice.text == once.text);
        CHECK_FALSE(twice.unresolved);
    }
}

// ---- whole-session properties ----------------------------------------------

namespace {

std::vector<std::string> transcript_script(int turns) {
    std::vector<std::string> items;
    static const std::vector<std::string> foods = {"korean", "thai", "italian", "chinese"};
    for (int i = 0; i < turns; ++i) {
        items.push_back("select * from restaurant where food = " + foods[static_cast<std::size_t>(i) % foods.size()]);
        items.push_back("Action: inform_name_phone");
        items.push_back("Response: [value_name] serves [value_food]. call [value_phone].");
    }
    return items;
}

std::string run_dialog(const std::shared_ptr<Engine>& e, int turns) {
    DialogSession s = open_session(e, script(transcript_script(turns)), {"restaurant"}, "fixed");
    std::string out;
    for (int i = 0; i < turns; ++i) out += to_json(step(s, "turn " + std::to_string(i)), false).dump() + "\n";
    return out;
}

}  // namespace

TEST_CASE("property: identical scripts give byte-identical records") {
    auto e = engine_with();
    for (int turns = 1; turns <= 5; ++turns) CHECK(run_dialog(e, turns) == run_dialog(e, turns));
}

TEST_CASE("property: disabling a stage leaves earlier prompts unchanged") {
    const std::vector<std::function<void(PipelineConfig&)>> ablations = {
        [](PipelineConfig& c) { c.use_policy_prompter = false; },
        [](PipelineConfig& c) { c.use_db = false; },
        [](PipelineConfig& c) {
            c.use_db = false;
            c.use_policy_prompter = false;
        },
    };
    auto full = engine_with();
    DialogSession a = open_session(full, script(transcript_script(4)), {"restaurant"});
    for (int i = 0; i < 4; ++i) step(a, "turn " + std::to_string(i));
    for (const auto& tweak : ablations) {
        DialogSession b = open_session(engine_with(tweak), script(transcript_script(4)), {"restaurant"});
        step(b, "turn 0");
        // The first turn's belief prompt precedes every ablated stage.
        CHECK(b.records[0].prompts[0].prompt == a.records[0].prompts[0].prompt);
        CHECK(b.records[0].prompts[1].prompt != a.records[0].prompts[1].prompt);
    }
}
