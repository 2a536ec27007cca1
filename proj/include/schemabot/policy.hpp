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

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "schemabot/belief.hpp"
#include "schemabot/schema.hpp"

namespace schemabot {

// Output markers shared by the formatting example and the completion parsers.
inline constexpr std::string_view kActionMarker = "Action:";
inline constexpr std::string_view kResponseMarker = "Response:";

enum class PolicyStage { kAction, kResponse, kCombined };

std::string_view to_string(PolicyStage stage);

struct SystemAction {
    std::vector<std::string> labels;

    std::string str() const;  // space-separated labels
    bool operator==(const SystemAction&) const = default;
};

// Lowercased labels with duplicates removed (first occurrence kept).
SystemAction make_action(std::string_view labels);

struct DelexResponse {
    std::string text;
    bool operator==(const DelexResponse&) const = default;
};

struct PolicyPrompt {
    std::string task_instruction;
    std::string formatting_example;
    std::string skeleton_rendering;  // empty when the policy prompter is ablated
    std::string test_input;

    std::string render() const;
};

// One block per template turn, in skeleton order.
std::string render_skeleton(const TaskSchema& schema);
std::string render_template_turn(const TemplateTurn& turn);

PolicyPrompt build_policy_prompt(const TaskSchema& schema, const DialogHistory& history,
                                 const BeliefState& belief, std::string_view db_summary,
                                 std::string_view formatting_example, PolicyStage stage,
                                 const std::optional<SystemAction>& action = std::nullopt);

SystemAction parse_action(std::string_view completion);
DelexResponse parse_response(std::string_view completion);

}  // namespace schemabot
