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

#include "schemabot/policy.hpp"

#include <algorithm>

#include "schemabot/text.hpp"

namespace schemabot {

std::string_view to_string(PolicyStage stage) {
    switch (stage) {
        case PolicyStage::kAction: return "action";
        case PolicyStage::kResponse: return "response";
        case PolicyStage::kCombined: return "combined";
    }
    return "action";
}

std::string SystemAction::str() const { return text::join(labels, " "); }

SystemAction make_action(std::string_view labels) {
    SystemAction a;
    std::string flat(labels);
    std::replace(flat.begin(), flat.end(), ',', ' ');
    for (auto& token : text::split_whitespace(flat)) {
        std::string label = text::to_lower(token);
        while (!label.empty() && (label.back() == '.' || label.back() == ';')) label.pop_back();
        if (label.empty()) continue;
        if (std::find(a.labels.begin(), a.labels.end(), label) == a.labels.end()) {
            a.labels.push_back(std::move(label));
        }
    }
    return a;
}

std::string render_template_turn(const TemplateTurn& turn) {
    std::string out = "Turn " + turn.id + ":\n";
    if (const auto* u = std::get_if<UserUtterance>(&turn.trigger)) {
        out += "  User: " + u->text + "\n";
    } else {
        const auto& c = std::get<DbCondition>(turn.trigger);
        out += "  DB: " + std::string(to_string(c.match_count)) + " match";
        out += c.match_count == MatchCount::kOne ? "" : "es";
        if (!c.constraints.empty()) {
            std::vector<std::string> parts;
            for (const auto& [slot, value] : c.constraints) parts.push_back(slot + " = " + value);
            out += " where " + text::join(parts, "; ");
        }
        out += "\n";
    }
    out += "  Action: " + turn.action + "\n";
    out += "  Response: " + turn.response + "\n";
    return out;
}

std::string render_skeleton(const TaskSchema& schema) {
    std::string out = "[" + schema.domain + "]\n";
    for (const auto& t : schema.policy.turns) out += render_template_turn(t);
    return out;
}

std::string PolicyPrompt::render() const {
    std::string out = task_instruction;
    out += "\n\nFormatting example:\n";
    out += formatting_example;
    if (!formatting_example.empty() && formatting_example.back() != '\n') out += '\n';
    if (!skeleton_rendering.empty()) {
        out += "\nPolicy skeleton:\n";
        out += skeleton_rendering;
    }
    out += "\nTest input:\n";
    out += test_input;
    return out;
}

PolicyPrompt build_policy_prompt(const TaskSchema& schema, const DialogHistory& history,
                                 const BeliefState& belief, std::string_view db_summary,
                                 std::string_view formatting_example, PolicyStage stage,
                                 const std::optional<SystemAction>& action) {
    if (stage == PolicyStage::kResponse && (!action || action->labels.empty())) {
        throw MissingAction("the response stage requires a system action");
    }
    PolicyPrompt p;
    p.task_instruction = schema.task_instruction_policy;
    p.formatting_example = std::string(formatting_example);
    p.skeleton_rendering = render_skeleton(schema);

    std::string in = history.render();
    in += "Belief state: " + render_belief_sql(belief) + "\n";
    if (!db_summary.empty()) in += "DB state: " + std::string(db_summary) + "\n";
    switch (stage) {
        case PolicyStage::kAction:
            in += "Next system action, one line starting with \"Action:\"";
            break;
        case PolicyStage::kResponse:
            in += std::string(kActionMarker) + " " + action->str() + "\n";
            in += "Delexicalized system response, one line starting with \"Response:\"";
            break;
        case PolicyStage::kCombined:
            in += "Next system action and delexicalized response, lines starting with \"Action:\" and "
                  "\"Response:\"";
            break;
    }
    p.test_input = std::move(in);
    return p;
}

namespace {

std::optional<std::string> marked_line(std::string_view completion, std::string_view marker) {
    for (const auto& line : text::split_lines(completion)) {
        std::string_view l = text::trim(line);
        if (text::istarts_with(l, marker)) return std::string(text::trim(l.substr(marker.size())));
    }
    return std::nullopt;
}

}  // namespace

SystemAction parse_action(std::string_view completion) {
    auto line = marked_line(completion, kActionMarker);
    if (!line) throw ParseFailure("no line starting with \"Action:\" in completion");
    SystemAction a = make_action(*line);
    if (a.labels.empty()) throw ParseFailure("\"Action:\" line carries no labels");
    return a;
}

DelexResponse parse_response(std::string_view completion) {
    auto line = marked_line(completion, kResponseMarker);
    if (!line) throw ParseFailure("no line starting with \"Response:\" in completion");
    if (line->empty()) throw ParseFailure("\"Response:\" line is empty");
    text::placeholders(*line);
    return DelexResponse{std::move(*line)};
}

}  // namespace schemabot
