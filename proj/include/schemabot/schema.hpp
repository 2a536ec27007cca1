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

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "schemabot/error.hpp"

namespace schemabot {

// Placeholder tokens that are always legal in template responses.
inline constexpr std::string_view kValueCountToken = "value_count";
inline constexpr std::string_view kChoiceToken = "choice";
// Reserved template turn id used for degraded-mode responses.
inline constexpr std::string_view kFallbackTurnId = "fallback";
inline constexpr std::string_view kDontCare = "dontcare";

enum class SlotKind { kCategorical, kNoncategorical };

struct SlotSpec {
    std::string name;
    SlotKind kind = SlotKind::kNoncategorical;
    // All legal values when categorical; a few examples otherwise.
    std::vector<std::string> values;
    // Token used inside brackets in delexicalized text ("value_" + name unless overridden).
    std::string placeholder;

    bool operator==(const SlotSpec&) const = default;
};

struct BeliefInstruction {
    std::string domain;
    std::vector<SlotSpec> slots;

    const SlotSpec* find_slot(std::string_view name) const;
    bool operator==(const BeliefInstruction&) const = default;
};

enum class MatchCount { kZero, kOne, kMany, kAny };

std::string_view to_string(MatchCount m);
std::optional<MatchCount> match_count_from_string(std::string_view s);
bool matches(MatchCount m, std::size_t count);

struct DbCondition {
    MatchCount match_count = MatchCount::kAny;
    std::map<std::string, std::string> constraints;

    bool operator==(const DbCondition&) const = default;
};

struct UserUtterance {
    std::string text;
    bool operator==(const UserUtterance&) const = default;
};

// One rule of a policy skeleton: (user utterance | DB condition) -> action -> response.
struct TemplateTurn {
    std::string id;
    std::variant<UserUtterance, DbCondition> trigger;
    std::string action;
    std::string response;

    bool has_user_trigger() const { return std::holds_alternative<UserUtterance>(trigger); }
    bool operator==(const TemplateTurn&) const = default;
};

struct PolicySkeleton {
    std::vector<TemplateTurn> turns;

    const TemplateTurn* find(std::string_view id) const;
    bool operator==(const PolicySkeleton&) const = default;
};

// Immutable once constructed; edits return new values.
struct TaskSchema {
    std::string domain;
    BeliefInstruction belief;
    PolicySkeleton policy;
    std::string task_instruction_dst;
    std::string task_instruction_policy;

    // Map placeholder token -> slot name (lowercased tokens).
    std::map<std::string, std::string> placeholder_map() const;
    bool operator==(const TaskSchema&) const = default;
};

TaskSchema parse_schema(std::string_view text);
std::vector<TaskSchema> parse_schema_bundle(std::string_view text);

// Canonical JSON text; parse_schema(serialize_schema(s)) == s.
std::string serialize_schema(const TaskSchema& s);
std::string serialize_turn(const TemplateTurn& t);

std::vector<Diagnostic> validate_schema(const TaskSchema& s);

// ---- skeleton edits -------------------------------------------------------

struct InsertTurn {
    TemplateTurn turn;
    std::optional<std::string> after;   // insert after this id
    std::optional<std::string> before;  // or before this id; neither = append
};

struct AmendTurn {
    std::string id;
    TemplateTurn turn;  // replacement; its id must equal `id`
};

struct RemoveTurn {
    std::string id;
};

// Declares a new informable slot so inserted turns can reference its placeholder.
struct AddSlot {
    SlotSpec slot;
};

using SkeletonEdit = std::variant<InsertTurn, AmendTurn, RemoveTurn, AddSlot>;

// Applies all edits atomically: either every edit succeeds and the result
// validates, or the input is left untouched and an error is thrown.
TaskSchema edit_skeleton(const TaskSchema& s, const std::vector<SkeletonEdit>& edits);

std::vector<SkeletonEdit> parse_edits(std::string_view text);

}  // namespace schemabot
