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
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "schemabot/schema.hpp"

namespace schemabot {

enum class Speaker { kUser, kSystem };

struct Turn {
    Speaker speaker = Speaker::kUser;
    std::string text;

    bool operator==(const Turn&) const = default;
};

struct DialogHistory {
    std::vector<Turn> turns;

    // Renders one turn per line as "User: ..." / "System: ...".
    std::string render() const;
    bool operator==(const DialogHistory&) const = default;
};

// Domain plus ordered slot-value constraints. Slots are unique.
struct BeliefState {
    std::string domain;
    std::vector<std::pair<std::string, std::string>> pairs;

    // Value for `slot`, or nullptr.
    const std::string* find(std::string_view slot) const;
    // Inserts or overwrites, keeping the first position of an existing slot.
    void set(std::string slot, std::string value);
    bool empty() const { return pairs.empty(); }
    bool operator==(const BeliefState&) const = default;
};

// Maps surface forms to canonical values ("don't care" -> "dontcare").
// Loaded from the shipped data file; the default instance only normalizes.
class Canonicalizer {
  public:
    Canonicalizer() = default;
    explicit Canonicalizer(std::map<std::string, std::string> table);

    static Canonicalizer from_json(std::string_view text);
    static Canonicalizer from_file(const std::string& path);

    std::string canonical(std::string_view value) const;
    const std::map<std::string, std::string>& table() const { return table_; }

  private:
    std::map<std::string, std::string> table_;
};

struct DstPrompt {
    std::string task_instruction;
    std::string belief_instructions;
    std::string formatting_example;
    std::string test_input;

    std::string render() const;
};

std::string render_belief_instruction(const BeliefInstruction& bi);

DstPrompt build_dst_prompt(std::span<const TaskSchema> schemas, const DialogHistory& history,
                           std::string_view formatting_example);

// Finds the first well-formed `select * from ...` statement in an LLM
// completion and resolves it against `schemas`.
BeliefState parse_belief_sql(std::string_view completion, std::span<const TaskSchema> schemas,
                             const Canonicalizer& canon = {});

// Grammar-only parse (no schema checks); values are normalized but not
// canonicalized. Throws ParseFailure.
BeliefState parse_belief_sql_unchecked(std::string_view completion);

std::string render_belief_sql(const BeliefState& b);

// Throws UnknownDomain / UnknownSlot / InvalidValue when `b` breaks the
// BeliefState invariants for the bound schemas.
void check_belief(const BeliefState& b, std::span<const TaskSchema> schemas);

const TaskSchema* find_schema(std::span<const TaskSchema> schemas, std::string_view domain);

}  // namespace schemabot
