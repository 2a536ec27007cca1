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

#include <algorithm>

#include <nlohmann/json.hpp>

#include "schemabot/belief.hpp"
#include "schemabot/error.hpp"
#include "schemabot/schema.hpp"
#include "schemabot/text.hpp"
#include "support.hpp"

using namespace schemabot;
using nlohmann::json;
using testing::Gen;

namespace {

json minimal_schema() {
    return json::parse(R"({
      "domain": "restaurant",
      "task_instruction_dst": "Track the belief state.",
      "task_instruction_policy": "Follow the skeleton.",
      "slots": [{"name": "pricerange", "kind": "categorical", "values": ["cheap", "moderate", "expensive", "dontcare"]}],
      "policy": [{"id": "greet", "user_utterance": "hi", "action": "greet", "response": "hello, what price range?"}]
    })");
}

std::size_t count_errors(const std::vector<Diagnostic>& ds) {
    return static_cast<std::size_t>(std::count_if(ds.begin(), ds.end(), [](const Diagnostic& d) { return d.is_error(); }));
}

}  // namespace

TEST_CASE("text helpers") {
    CHECK(text::normalize("  Don't   CARE \n") == "don't care");
    CHECK(text::canonical_identifier("Price Range") == "price_range");
    CHECK(text::is_identifier("value_name"));
    CHECK_FALSE(text::is_identifier("Value-Name"));
    CHECK(text::placeholders("[value_name] is at [value_address].") == std::vector<std::string>{"value_name", "value_address"});
    CHECK_THROWS_AS(text::placeholders("phone is [value_phone"), MalformedPlaceholder);
    CHECK_THROWS_AS(text::placeholders("a ] b"), MalformedPlaceholder);
    CHECK_THROWS_AS(text::placeholders("[a [b]]"), MalformedPlaceholder);
    CHECK_THROWS_AS(text::placeholders("[]"), MalformedPlaceholder);
    CHECK_THROWS_AS(text::placeholders("[value name]"), MalformedPlaceholder);
}

TEST_CASE("smallest legal schema parses with one template turn") {
    const TaskSchema s = parse_schema(minimal_schema().dump());
    CHECK(s.domain == "restaurant");
    CHECK(s.belief.domain == "restaurant");
    REQUIRE(s.belief.slots.size() == 1);
    CHECK(s.belief.slots[0].kind == SlotKind::kCategorical);
    CHECK(s.belief.slots[0].placeholder == "value_pricerange");
    CHECK(s.policy.turns.size() == 1);
    // One turn is legal but outside the recommended range.
    const auto ds = validate_schema(s);
    CHECK(count_errors(ds) == 0);
    REQUIRE(ds.size() == 1);
    CHECK(ds[0].message.find("outside 10-20 range") != std::string::npos);
}

TEST_CASE("shipped restaurant schema carries the restaurant belief instruction") {
    const TaskSchema s = testing::load_schema("restaurant");
    CHECK(validate_schema(s).empty());
    std::vector<std::string> names;
    for (const auto& slot : s.belief.slots) names.push_back(slot.name);
    CHECK(names == std::vector<std::string>{"food", "pricerange", "area", "name", "phone", "address", "postcode"});
    const SlotSpec* price = s.belief.find_slot("PriceRange");
    REQUIRE(price);
    CHECK(price->values == std::vector<std::string>{"cheap", "moderate", "expensive"});
    const std::string rendered = render_belief_instruction(s.belief);
    CHECK(rendered.find("- pricerange: one of cheap, moderate, expensive, dontcare\n") != std::string::npos);
    CHECK(rendered.find("golden wok") != std::string::npos);
    REQUIRE(s.policy.find(kFallbackTurnId));
}

TEST_CASE("every shipped schema validates cleanly") {
    for (const char* name : {"restaurant", "restaurant_ext", "hotel", "attraction"}) {
        CAPTURE(name);
        const TaskSchema s = testing::load_schema(name);
        CHECK(validate_schema(s).empty());
        CHECK(s.policy.find(kFallbackTurnId));
    }
}

TEST_CASE("duplicate slot is reported by name") {
    json j = minimal_schema();
    j["slots"].push_back({{"name", "food"}, {"kind", "noncategorical"}, {"values", {"korean"}}});
    j["slots"].push_back({{"name", "Food"}, {"kind", "noncategorical"}, {"values", {"thai"}}});
    try {
        parse_schema(j.dump());
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        REQUIRE(e.diagnostics().size() >= 1);
        const bool names_food = std::any_of(e.diagnostics().begin(), e.diagnostics().end(), [](const Diagnostic& d) {
            return d.element.find("food") != std::string::npos && d.message.find("food") != std::string::npos;
        });
        CHECK(names_food);
    }
}

TEST_CASE("all structural problems are reported together") {
    json j = minimal_schema();
    j["slots"][0]["kind"] = "weird";
    j["policy"][0].erase("action");
    j["policy"].push_back({{"id", "x"}, {"action", "a"}, {"response", "r"}});  // no trigger
    try {
        parse_schema(j.dump());
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(e.diagnostics().size() >= 3);
    }
}

TEST_CASE("malformed JSON is a syntax error with a position") {
    try {
        parse_schema("{\"domain\": \"restaurant\",, }");
        FAIL("expected SyntaxError");
    } catch (const SyntaxError& e) {
        CHECK(e.position() > 0);
        CHECK(e.code() == "syntax_error");
    }
}

TEST_CASE("unresolved placeholder yields one error on that turn") {
    TaskSchema s = testing::load_schema("restaurant");
    s.policy.turns[5].response = "call [value_phon] now";
    const auto ds = validate_schema(s);
    REQUIRE(count_errors(ds) == 1);
    CHECK(ds[0].element == "turn:" + s.policy.turns[5].id);
    CHECK(ds[0].message.find("value_phon") != std::string::npos);
}

TEST_CASE("reserved placeholders resolve without a slot") {
    TaskSchema s = testing::load_schema("restaurant");
    s.policy.turns[0].response = "there are [value_count] places, [choice] in total";
    CHECK(validate_schema(s).empty());
}

TEST_CASE("25 template turns only warns") {
    TaskSchema s = testing::load_schema("restaurant");
    while (s.policy.turns.size() < 25) {
        TemplateTurn t = s.policy.turns[0];
        t.id = "extra_" + std::to_string(s.policy.turns.size());
        s.policy.turns.push_back(t);
    }
    const auto ds = validate_schema(s);
    CHECK(count_errors(ds) == 0);
    REQUIRE(ds.size() == 1);
    CHECK(ds[0].severity == Severity::kWarning);
    CHECK(ds[0].message.find("outside 10-20 range") != std::string::npos);
}

TEST_CASE("validation covers every typed invariant") {
    const TaskSchema base = testing::load_schema("restaurant");
    auto expect_error = [](TaskSchema s) { CHECK(count_errors(validate_schema(s)) >= 1); };
    {
        TaskSchema s = base;
        s.belief.domain = "hotel";
        expect_error(s);
    }
    {
        TaskSchema s = base;
        s.belief.slots[1].values.clear();
        expect_error(s);
    }
    {
        TaskSchema s = base;
        s.belief.slots[1].values.push_back("CHEAP");
        expect_error(s);
    }
    {
        TaskSchema s = base;
        s.belief.slots[1].placeholder = s.belief.slots[0].placeholder;
        expect_error(s);
    }
    {
        TaskSchema s = base;
        s.belief.slots[0].placeholder = "value_count";
        expect_error(s);
    }
    {
        TaskSchema s = base;
        s.policy.turns[1].id = s.policy.turns[0].id;
        expect_error(s);
    }
    {
        TaskSchema s = base;
        s.policy.turns.clear();
        expect_error(s);
    }
    {
        TaskSchema s = base;
        std::get<DbCondition>(s.policy.turns[1].trigger).constraints["stars"] = "4";
        expect_error(s);
    }
}

TEST_CASE("canonical serialization round-trips") {
    for (const char* name : {"restaurant", "hotel", "attraction", "restaurant_ext"}) {
        const TaskSchema s = testing::load_schema(name);
        const std::string once = serialize_schema(s);
        const TaskSchema again = parse_schema(once);
        CHECK(again == s);
        CHECK(serialize_schema(again) == once);
    }
}

TEST_CASE("bundle files hold several schemas") {
    const std::string bundle = "[" + serialize_schema(testing::load_schema("restaurant")) + "," +
                               serialize_schema(testing::load_schema("hotel")) + "]";
    const auto schemas = parse_schema_bundle(bundle);
    REQUIRE(schemas.size() == 2);
    CHECK(schemas[0].domain == "restaurant");
    CHECK(schemas[1].domain == "hotel");
}

TEST_CASE("extension edit adds four turns and four slots") {
    const TaskSchema base = testing::load_schema("restaurant");
    const TaskSchema ext = edit_skeleton(base, parse_edits(testing::slurp(testing::data_path("edits/restaurant_ext.json"))));
    CHECK(ext.policy.turns.size() == base.policy.turns.size() + 4);
    for (const char* token : {"restaurant_dish", "value_price", "start_time", "end_time"}) {
        CAPTURE(token);
        CHECK(ext.placeholder_map().count(token) == 1);
        const bool used = std::any_of(ext.policy.turns.begin(), ext.policy.turns.end(), [&](const TemplateTurn& t) {
            return t.response.find(std::string("[") + token + "]") != std::string::npos;
        });
        CHECK(used);
    }
    // Pre-existing turns are untouched.
    for (const auto& t : base.policy.turns) {
        const TemplateTurn* after = ext.policy.find(t.id);
        REQUIRE(after);
        CHECK(serialize_turn(*after) == serialize_turn(t));
    }
    // The shipped extended schema is exactly this edit's output.
    CHECK(serialize_schema(ext) == testing::slurp(testing::data_path("schemas/restaurant_ext.json")));
}

TEST_CASE("remove then insert back restores the schema") {
    const TaskSchema s = testing::load_schema("restaurant");
    const TemplateTurn victim = s.policy.turns[4];
    const std::string after_id = s.policy.turns[3].id;
    const TaskSchema removed = edit_skeleton(s, {RemoveTurn{victim.id}});
    CHECK(removed.policy.turns.size() == s.policy.turns.size() - 1);
    const TaskSchema restored = edit_skeleton(removed, {InsertTurn{victim, after_id, std::nullopt}});
    CHECK(serialize_schema(restored) == serialize_schema(s));
}

TEST_CASE("amend of an unknown id fails") {
    const TaskSchema s = testing::load_schema("restaurant");
    TemplateTurn t = s.policy.turns[0];
    t.id = "t99";
    CHECK_THROWS_AS(edit_skeleton(s, {AmendTurn{"t99", t}}), UnknownTurnId);
    CHECK_THROWS_AS(edit_skeleton(s, {RemoveTurn{"t99"}}), UnknownTurnId);
}

TEST_CASE("amend keeps position and id") {
    const TaskSchema s = testing::load_schema("restaurant");
    TemplateTurn t = s.policy.turns[2];
    t.response = "[value_name] serves [value_food] food.";
    const TaskSchema out = edit_skeleton(s, {AmendTurn{t.id, t}});
    CHECK(out.policy.turns[2].response == t.response);
    CHECK(out.policy.turns.size() == s.policy.turns.size());
}

TEST_CASE("an invalid edit set is rejected as a whole") {
    const TaskSchema s = testing::load_schema("restaurant");
    TemplateTurn good = s.policy.turns[0];
    good.id = "fresh";
    TemplateTurn bad = s.policy.turns[0];
    bad.id = "broken";
    bad.response = "see [value_nowhere]";
    CHECK_THROWS_AS(edit_skeleton(s, {InsertTurn{good, {}, {}}, InsertTurn{bad, {}, {}}}), ValidationError);
    CHECK_THROWS_AS(edit_skeleton(s, {InsertTurn{s.policy.turns[1], {}, {}}}), ValidationError);
    // The input value is unchanged.
    CHECK(serialize_schema(s) == serialize_schema(testing::load_schema("restaurant")));
}

TEST_CASE("edit file format errors are diagnostics") {
    CHECK_THROWS_AS(parse_edits(R"({"edits": [{"op": "explode"}]})"), ValidationError);
    CHECK_THROWS_AS(parse_edits(R"({"nothing": []})"), ValidationError);
    CHECK(parse_edits(R"([{"op": "remove", "id": "greet"}])").size() == 1);
}

// ---- properties ------------------------------------------------------------

namespace {

TaskSchema random_schema(Gen& g) {
    TaskSchema s;
    s.domain = "d" + g.word(2, 6);
    s.belief.domain = s.domain;
    s.task_instruction_dst = "dst " + g.word();
    s.task_instruction_policy = "policy " + g.word();
    const int n_slots = g.uniform(1, 6);
    for (int i = 0; i < n_slots; ++i) {
        SlotSpec slot;
        slot.name = "s" + std::to_string(i) + "_" + g.word(1, 4);
        slot.placeholder = "value_" + slot.name;
        if (g.coin()) {
            slot.kind = SlotKind::kCategorical;
            const int nv = g.uniform(1, 4);
            for (int v = 0; v < nv; ++v) slot.values.push_back("v" + std::to_string(v) + g.word(1, 3));
        } else {
            slot.kind = SlotKind::kNoncategorical;
            if (g.coin()) slot.values.push_back(g.word() + " " + g.word());
        }
        s.belief.slots.push_back(slot);
    }
    const int n_turns = g.uniform(10, 20);
    for (int i = 0; i < n_turns; ++i) {
        TemplateTurn t;
        t.id = "t" + std::to_string(i);
        if (g.coin()) {
            t.trigger = UserUtterance{g.word() + " " + g.word()};
        } else {
            DbCondition c;
            c.match_count = static_cast<MatchCount>(g.uniform(0, 3));
            if (g.coin()) {
                const auto& slot = g.pick(s.belief.slots);
                c.constraints[slot.name] = slot.values.empty() ? g.word() : slot.values[0];
            }
            t.trigger = c;
        }
        t.action = "act_" + g.word();
        const auto& slot = g.pick(s.belief.slots);
        t.response = "here is [" + slot.placeholder + "]" + (g.coin() ? " of [value_count]" : "") + ".";
        s.policy.turns.push_back(t);
    }
    return s;
}

}  // namespace

TEST_CASE("property: random valid schemas round-trip and validate") {
    Gen g(20261015);
    for (int i = 0; i < 300; ++i) {
        const TaskSchema s = random_schema(g);
        REQUIRE(validate_schema(s).empty());
        const std::string text = serialize_schema(s);
        const TaskSchema back = parse_schema(text);
        CHECK(back == s);
        CHECK(serialize_schema(back) == text);
    }
}

TEST_CASE("property: every injected single fault is reported") {
    Gen g(77);
    const int kFaults = 8;
    for (int i = 0; i < 400; ++i) {
        TaskSchema s = random_schema(g);
        const int fault = i % kFaults;
        CAPTURE(fault);
        switch (fault) {
            case 0: s.belief.slots.push_back(s.belief.slots[0]); break;  // duplicate slot
            case 1: {  // categorical without values
                s.belief.slots[0].kind = SlotKind::kCategorical;
                s.belief.slots[0].values.clear();
                break;
            }
            case 2: s.policy.turns.back().id = s.policy.turns.front().id; break;
            case 3: s.policy.turns[0].response += " [value_missing_slot]"; break;
            case 4: s.policy.turns[0].response += " [broken"; break;
            case 5: s.belief.domain = s.domain + "x"; break;
            case 6: {
                DbCondition c;
                c.constraints["undeclared_slot"] = "x";
                s.policy.turns[0].trigger = c;
                break;
            }
            case 7: s.policy.turns[0].action = "  "; break;
        }
        CHECK(count_errors(validate_schema(s)) >= 1);
    }
}

TEST_CASE("property: edits leave untouched turns byte-identical") {
    Gen g(99);
    for (int i = 0; i < 200; ++i) {
        const TaskSchema s = random_schema(g);
        std::vector<SkeletonEdit> edits;
        std::set<std::string> touched;
        const int n = g.uniform(1, 4);
        for (int e = 0; e < n; ++e) {
            const TemplateTurn& target = g.pick(s.policy.turns);
            if (touched.count(target.id)) continue;
            switch (g.uniform(0, 2)) {
                case 0: {
                    TemplateTurn t = target;
                    t.id = "new_" + std::to_string(e);
                    t.action = "inserted";
                    edits.emplace_back(InsertTurn{t, target.id, std::nullopt});
                    break;
                }
                case 1: {
                    TemplateTurn t = target;
                    t.action = "amended";
                    edits.emplace_back(AmendTurn{target.id, t});
                    touched.insert(target.id);
                    break;
                }
                default:
                    if (s.policy.turns.size() - touched.size() > 1) {
                        edits.emplace_back(RemoveTurn{target.id});
                        touched.insert(target.id);
                    }
            }
        }
        const TaskSchema out = edit_skeleton(s, edits);
        for (const auto& t : s.policy.turns) {
            if (touched.count(t.id)) continue;
            const TemplateTurn* after = out.policy.find(t.id);
            REQUIRE(after);
            CHECK(serialize_turn(*after) == serialize_turn(t));
        }
    }
}
