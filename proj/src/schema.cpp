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

#include "schemabot/schema.hpp"

#include <algorithm>
#include <set>

#include <nlohmann/json.hpp>

#include "schemabot/text.hpp"

namespace schemabot {

using nlohmann::json;

std::string to_string(const Diagnostic& d) {
    return std::string(d.severity == Severity::kError ? "error" : "warning") + " [" + d.element +
           "] " + d.message;
}

ValidationError::ValidationError(std::vector<Diagnostic> diagnostics)
    : Error("validation_error",
            [&] {
                std::string msg = "validation failed:";
                for (const auto& d : diagnostics) msg += "\n  " + to_string(d);
                return msg;
            }()),
      diagnostics_(std::move(diagnostics)) {}

const SlotSpec* BeliefInstruction::find_slot(std::string_view name) const {
    for (const auto& s : slots) {
        if (text::iequals(s.name, name)) return &s;
    }
    return nullptr;
}

std::string_view to_string(MatchCount m) {
    switch (m) {
        case MatchCount::kZero: return "zero";
        case MatchCount::kOne: return "one";
        case MatchCount::kMany: return "many";
        case MatchCount::kAny: return "any";
    }
    return "any";
}

std::optional<MatchCount> match_count_from_string(std::string_view s) {
    const std::string v = text::normalize(s);
    if (v == "zero") return MatchCount::kZero;
    if (v == "one") return MatchCount::kOne;
    if (v == "many") return MatchCount::kMany;
    if (v == "any") return MatchCount::kAny;
    return std::nullopt;
}

bool matches(MatchCount m, std::size_t count) {
    switch (m) {
        case MatchCount::kZero: return count == 0;
        case MatchCount::kOne: return count == 1;
        case MatchCount::kMany: return count > 1;
        case MatchCount::kAny: return true;
    }
    return false;
}

const TemplateTurn* PolicySkeleton::find(std::string_view id) const {
    for (const auto& t : turns) {
        if (text::iequals(t.id, id)) return &t;
    }
    return nullptr;
}

std::map<std::string, std::string> TaskSchema::placeholder_map() const {
    std::map<std::string, std::string> out;
    for (const auto& s : belief.slots) out.emplace(text::to_lower(s.placeholder), s.name);
    return out;
}

namespace {

// Collects structural problems while walking a JSON document so that every
// violation is reported, not just the first.
class Reader {
  public:
    std::vector<Diagnostic> diags;

    void error(std::string element, std::string message) {
        diags.push_back({Severity::kError, std::move(element), std::move(message)});
    }

    std::string string_field(const json& obj, const char* key, const std::string& element,
                             bool required = true) {
        auto it = obj.find(key);
        if (it == obj.end()) {
            if (required) error(element, std::string("missing field '") + key + "'");
            return {};
        }
        if (!it->is_string()) {
            error(element, std::string("field '") + key + "' must be a string");
            return {};
        }
        return it->get<std::string>();
    }

    std::string identifier(const json& obj, const char* key, const std::string& element) {
        const std::string raw = string_field(obj, key, element);
        if (raw.empty()) return raw;
        std::string id = text::canonical_identifier(raw);
        if (!text::is_identifier(id)) {
            error(element, std::string("'") + raw + "' is not a valid identifier");
        }
        return id;
    }

    SlotSpec slot(const json& j, std::size_t index) {
        SlotSpec s;
        std::string element = "slot#" + std::to_string(index);
        if (!j.is_object()) {
            error(element, "slot must be an object");
            return s;
        }
        s.name = identifier(j, "name", element);
        if (!s.name.empty()) element = "slot:" + s.name;
        const std::string kind = text::normalize(string_field(j, "kind", element, false));
        if (kind.empty() || kind == "noncategorical" || kind == "non-categorical") {
            s.kind = SlotKind::kNoncategorical;
        } else if (kind == "categorical") {
            s.kind = SlotKind::kCategorical;
        } else {
            error(element, "unknown slot kind '" + kind + "'");
        }
        if (auto it = j.find("values"); it != j.end()) {
            if (!it->is_array()) {
                error(element, "'values' must be an array of strings");
            } else {
                for (const auto& v : *it) {
                    if (!v.is_string()) {
                        error(element, "'values' must be an array of strings");
                        continue;
                    }
                    s.values.push_back(text::normalize(v.get<std::string>()));
                }
            }
        }
        std::string placeholder = string_field(j, "placeholder", element, false);
        s.placeholder = placeholder.empty() ? "value_" + s.name : text::to_lower(text::trim(placeholder));
        return s;
    }

    DbCondition db_condition(const json& j, const std::string& element) {
        DbCondition c;
        if (!j.is_object()) {
            error(element, "'db_condition' must be an object");
            return c;
        }
        const std::string mc = string_field(j, "match_count", element, false);
        if (!mc.empty()) {
            if (auto m = match_count_from_string(mc)) {
                c.match_count = *m;
            } else {
                error(element, "unknown match_count '" + mc + "'");
            }
        }
        if (auto it = j.find("constraints"); it != j.end()) {
            if (!it->is_object()) {
                error(element, "'constraints' must be an object");
            } else {
                for (const auto& [k, v] : it->items()) {
                    if (!v.is_string()) {
                        error(element, "constraint '" + k + "' must be a string");
                        continue;
                    }
                    c.constraints[text::canonical_identifier(k)] = text::normalize(v.get<std::string>());
                }
            }
        }
        return c;
    }

    TemplateTurn turn(const json& j, std::size_t index) {
        TemplateTurn t;
        std::string element = "turn#" + std::to_string(index);
        if (!j.is_object()) {
            error(element, "template turn must be an object");
            return t;
        }
        t.id = identifier(j, "id", element);
        if (!t.id.empty()) element = "turn:" + t.id;
        const bool has_user = j.contains("user_utterance");
        const bool has_db = j.contains("db_condition");
        if (has_user == has_db) {
            error(element, "exactly one of 'user_utterance' or 'db_condition' must be set");
        }
        if (has_user) {
            t.trigger = UserUtterance{std::string(text::trim(string_field(j, "user_utterance", element)))};
        } else if (has_db) {
            t.trigger = db_condition(j.at("db_condition"), element);
        }
        t.action = text::normalize(string_field(j, "action", element));
        t.response = std::string(text::trim(string_field(j, "response", element)));
        return t;
    }

    TaskSchema schema(const json& j) {
        TaskSchema s;
        if (!j.is_object()) {
            error("schema", "schema must be a JSON object");
            return s;
        }
        s.domain = identifier(j, "domain", "schema");
        s.belief.domain = s.domain;
        s.task_instruction_dst = std::string(text::trim(string_field(j, "task_instruction_dst", "schema")));
        s.task_instruction_policy =
            std::string(text::trim(string_field(j, "task_instruction_policy", "schema")));
        if (auto it = j.find("slots"); it == j.end() || !it->is_array()) {
            error("schema", "'slots' must be an array");
        } else {
            for (std::size_t i = 0; i < it->size(); ++i) s.belief.slots.push_back(slot((*it)[i], i));
        }
        if (auto it = j.find("policy"); it == j.end() || !it->is_array()) {
            error("schema", "'policy' must be an array");
        } else {
            for (std::size_t i = 0; i < it->size(); ++i) s.policy.turns.push_back(turn((*it)[i], i));
        }
        return s;
    }
};

json parse_json(std::string_view text) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw SyntaxError(e.byte, e.what());
    }
}

json slot_to_json(const SlotSpec& s) {
    return json{{"name", s.name},
                {"kind", s.kind == SlotKind::kCategorical ? "categorical" : "noncategorical"},
                {"values", s.values},
                {"placeholder", s.placeholder}};
}

json turn_to_json(const TemplateTurn& t) {
    json j{{"id", t.id}, {"action", t.action}, {"response", t.response}};
    if (const auto* u = std::get_if<UserUtterance>(&t.trigger)) {
        j["user_utterance"] = u->text;
    } else {
        const auto& c = std::get<DbCondition>(t.trigger);
        j["db_condition"] = json{{"match_count", std::string(to_string(c.match_count))},
                                 {"constraints", c.constraints}};
    }
    return j;
}

json schema_to_json(const TaskSchema& s) {
    json slots = json::array();
    for (const auto& slot : s.belief.slots) slots.push_back(slot_to_json(slot));
    json policy = json::array();
    for (const auto& t : s.policy.turns) policy.push_back(turn_to_json(t));
    return json{{"domain", s.domain},
                {"task_instruction_dst", s.task_instruction_dst},
                {"task_instruction_policy", s.task_instruction_policy},
                {"slots", std::move(slots)},
                {"policy", std::move(policy)}};
}

TaskSchema schema_from_json(const json& j) {
    Reader r;
    TaskSchema s = r.schema(j);
    if (!r.diags.empty()) throw ValidationError(std::move(r.diags));
    auto diags = validate_schema(s);
    std::erase_if(diags, [](const Diagnostic& d) { return !d.is_error(); });
    if (!diags.empty()) throw ValidationError(std::move(diags));
    return s;
}

}  // namespace

TaskSchema parse_schema(std::string_view text) { return schema_from_json(parse_json(text)); }

std::vector<TaskSchema> parse_schema_bundle(std::string_view text) {
    const json j = parse_json(text);
    std::vector<TaskSchema> out;
    if (j.is_array()) {
        for (const auto& item : j) out.push_back(schema_from_json(item));
    } else {
        out.push_back(schema_from_json(j));
    }
    return out;
}

std::string serialize_schema(const TaskSchema& s) { return schema_to_json(s).dump(2) + "\n"; }

std::string serialize_turn(const TemplateTurn& t) { return turn_to_json(t).dump(); }

std::vector<Diagnostic> validate_schema(const TaskSchema& s) {
    std::vector<Diagnostic> out;
    auto error = [&](std::string element, std::string message) {
        out.push_back({Severity::kError, std::move(element), std::move(message)});
    };
    auto warning = [&](std::string element, std::string message) {
        out.push_back({Severity::kWarning, std::move(element), std::move(message)});
    };

    if (!text::is_identifier(s.domain)) error("schema", "domain '" + s.domain + "' is not a valid identifier");
    if (s.belief.domain != s.domain) {
        error("schema", "belief instruction domain '" + s.belief.domain + "' differs from schema domain '" +
                            s.domain + "'");
    }
    if (s.task_instruction_dst.empty()) warning("schema", "empty DST task instruction");
    if (s.task_instruction_policy.empty()) warning("schema", "empty policy task instruction");

    std::set<std::string> slot_names;
    std::set<std::string> tokens;
    for (const auto& slot : s.belief.slots) {
        const std::string element = "slot:" + slot.name;
        if (!text::is_identifier(slot.name)) error(element, "slot name is not a valid identifier");
        if (!slot_names.insert(text::to_lower(slot.name)).second) {
            error(element, "duplicate slot '" + slot.name + "'");
        }
        if (slot.kind == SlotKind::kCategorical) {
            if (slot.values.empty()) error(element, "categorical slot has no values");
            std::set<std::string> seen;
            for (const auto& v : slot.values) {
                if (!seen.insert(text::to_lower(v)).second) {
                    error(element, "duplicate value '" + v + "'");
                }
            }
        }
        const std::string token = text::to_lower(slot.placeholder);
        if (token.empty() || !text::is_identifier(token)) {
            error(element, "placeholder '" + slot.placeholder + "' is not a valid token");
        } else if (token == kValueCountToken || token == kChoiceToken) {
            error(element, "placeholder '" + token + "' is reserved");
        } else if (!tokens.insert(token).second) {
            error(element, "placeholder '" + token + "' is used by more than one slot");
        }
    }

    const auto& turns = s.policy.turns;
    if (turns.empty()) {
        error("policy", "policy skeleton has no template turns");
    } else if (turns.size() < 10 || turns.size() > 20) {
        warning("policy", std::to_string(turns.size()) + " template turns is outside 10-20 range");
    }
    std::set<std::string> ids;
    for (const auto& t : turns) {
        const std::string element = "turn:" + t.id;
        if (!text::is_identifier(t.id)) error(element, "turn id is not a valid identifier");
        if (!ids.insert(text::to_lower(t.id)).second) error(element, "duplicate turn id '" + t.id + "'");
        if (const auto* u = std::get_if<UserUtterance>(&t.trigger)) {
            if (text::trim(u->text).empty()) error(element, "empty user utterance trigger");
        } else {
            for (const auto& [slot, value] : std::get<DbCondition>(t.trigger).constraints) {
                if (!s.belief.find_slot(slot)) error(element, "DB condition references undeclared slot '" + slot + "'");
            }
        }
        if (text::trim(t.action).empty()) error(element, "empty action");
        if (text::trim(t.response).empty()) error(element, "empty response");
        try {
            for (const auto& token : text::placeholders(t.response)) {
                const std::string lower = text::to_lower(token);
                if (lower == kValueCountToken || lower == kChoiceToken) continue;
                if (!tokens.count(lower)) error(element, "unresolved placeholder [" + token + "]");
            }
        } catch (const MalformedPlaceholder& e) {
            error(element, e.what());
        }
    }
    return out;
}

// ---- edits ----------------------------------------------------------------

namespace {

std::vector<TemplateTurn>::iterator find_turn(std::vector<TemplateTurn>& turns, const std::string& id) {
    return std::find_if(turns.begin(), turns.end(),
                        [&](const TemplateTurn& t) { return text::iequals(t.id, id); });
}

struct EditApplier {
    TaskSchema& s;

    void operator()(const InsertTurn& e) {
        auto& turns = s.policy.turns;
        if (find_turn(turns, e.turn.id) != turns.end()) {
            throw ValidationError({{Severity::kError, "turn:" + e.turn.id, "insert duplicates an existing turn id"}});
        }
        auto pos = turns.end();
        if (e.after) {
            pos = find_turn(turns, *e.after);
            if (pos == turns.end()) throw UnknownTurnId("no template turn with id '" + *e.after + "'");
            ++pos;
        } else if (e.before) {
            pos = find_turn(turns, *e.before);
            if (pos == turns.end()) throw UnknownTurnId("no template turn with id '" + *e.before + "'");
        }
        turns.insert(pos, e.turn);
    }

    void operator()(const AmendTurn& e) {
        auto it = find_turn(s.policy.turns, e.id);
        if (it == s.policy.turns.end()) throw UnknownTurnId("no template turn with id '" + e.id + "'");
        TemplateTurn replacement = e.turn;
        replacement.id = it->id;
        *it = std::move(replacement);
    }

    void operator()(const RemoveTurn& e) {
        auto it = find_turn(s.policy.turns, e.id);
        if (it == s.policy.turns.end()) throw UnknownTurnId("no template turn with id '" + e.id + "'");
        s.policy.turns.erase(it);
    }

    void operator()(const AddSlot& e) {
        if (s.belief.find_slot(e.slot.name)) {
            throw ValidationError({{Severity::kError, "slot:" + e.slot.name, "slot already declared"}});
        }
        s.belief.slots.push_back(e.slot);
    }
};

}  // namespace

TaskSchema edit_skeleton(const TaskSchema& s, const std::vector<SkeletonEdit>& edits) {
    TaskSchema out = s;
    EditApplier apply{out};
    for (const auto& e : edits) std::visit(apply, e);
    auto diags = validate_schema(out);
    std::erase_if(diags, [](const Diagnostic& d) { return !d.is_error(); });
    if (!diags.empty()) throw ValidationError(std::move(diags));
    return out;
}

std::vector<SkeletonEdit> parse_edits(std::string_view text) {
    const json doc = parse_json(text);
    const json* list = &doc;
    if (doc.is_object()) {
        auto it = doc.find("edits");
        if (it == doc.end()) throw ValidationError({{Severity::kError, "edits", "missing 'edits' array"}});
        list = &*it;
    }
    if (!list->is_array()) throw ValidationError({{Severity::kError, "edits", "'edits' must be an array"}});

    std::vector<SkeletonEdit> out;
    Reader r;
    for (std::size_t i = 0; i < list->size(); ++i) {
        const json& e = (*list)[i];
        const std::string element = "edit#" + std::to_string(i);
        if (!e.is_object()) {
            r.error(element, "edit must be an object");
            continue;
        }
        const std::string op = text::normalize(r.string_field(e, "op", element));
        if (op == "insert") {
            InsertTurn ins;
            if (!e.contains("turn")) {
                r.error(element, "insert requires 'turn'");
                continue;
            }
            ins.turn = r.turn(e.at("turn"), i);
            if (e.contains("after")) ins.after = text::canonical_identifier(r.string_field(e, "after", element));
            if (e.contains("before")) ins.before = text::canonical_identifier(r.string_field(e, "before", element));
            out.emplace_back(std::move(ins));
        } else if (op == "amend") {
            AmendTurn am;
            am.id = text::canonical_identifier(r.string_field(e, "id", element));
            if (!e.contains("turn")) {
                r.error(element, "amend requires 'turn'");
                continue;
            }
            json turn = e.at("turn");
            if (turn.is_object() && !turn.contains("id")) turn["id"] = am.id;
            am.turn = r.turn(turn, i);
            out.emplace_back(std::move(am));
        } else if (op == "remove") {
            out.emplace_back(RemoveTurn{text::canonical_identifier(r.string_field(e, "id", element))});
        } else if (op == "add_slot") {
            if (!e.contains("slot")) {
                r.error(element, "add_slot requires 'slot'");
                continue;
            }
            out.emplace_back(AddSlot{r.slot(e.at("slot"), i)});
        } else {
            r.error(element, "unknown edit op '" + op + "'");
        }
    }
    if (!r.diags.empty()) throw ValidationError(std::move(r.diags));
    return out;
}

}  // namespace schemabot
