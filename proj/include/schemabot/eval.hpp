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
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "schemabot/pipeline.hpp"

namespace schemabot {

struct GoalSpec {
    std::map<std::string, std::string> constraints;
    std::vector<std::string> requests;
};

struct EvalTurn {
    std::string user;
    std::string gold_belief_sql;
    std::optional<std::vector<std::string>> gold_action;
    std::string gold_response_delex;
};

struct EvalDialog {
    std::string id;
    std::map<std::string, GoalSpec> goal;  // by domain
    std::vector<EvalTurn> turns;
};

// One EvalDialog per non-blank line. Throws SyntaxError with the line number.
std::vector<EvalDialog> parse_corpus(std::string_view jsonl);
std::vector<EvalDialog> load_corpus(const std::string& path);
EvalDialog dialog_from_json(const nlohmann::json& j);

// Goal domains and slots must resolve. Throws UnknownDomain / UnknownSlot.
void check_dialog(const EvalDialog& d, std::span<const TaskSchema> schemas);

struct InformSuccess {
    bool inform = false;
    bool success = false;
};

InformSuccess inform_success(const EvalDialog& dialog, std::span<const TurnRecord> transcript,
                             std::span<const TaskSchema> schemas, const Canonicalizer& canon = {});

// Lowercases and splits off . , ? ! before whitespace tokenization.
std::vector<std::string> bleu_tokens(std::string_view s);

// Corpus BLEU-4, uniform weights, brevity penalty, no smoothing; 0-100.
double corpus_bleu(std::span<const std::string> hypotheses, std::span<const std::string> references);

double combined(double inform, double success, double bleu);

struct ActionScores {
    double weighted_f1 = 0.0;
    double accuracy = 0.0;
};

ActionScores next_action_scores(std::span<const std::vector<std::string>> gold,
                                std::span<const std::vector<std::string>> predicted);

// Extra response-quality metric (for example an embedding-based score).
class ResponseScorer {
  public:
    virtual ~ResponseScorer() = default;
    virtual std::string name() const = 0;
    virtual double score(std::span<const std::string> hypotheses, std::span<const std::string> references) = 0;
};

using BackendFactory = std::function<std::shared_ptr<LlmBackend>(const EvalDialog&)>;
using InformSuccessFn =
    std::function<InformSuccess(const EvalDialog&, std::span<const TurnRecord>)>;

struct EvalConfig {
    BackendFactory backend_factory;
    std::size_t workers = 4;
    bool teacher_forcing = false;  // feed gold beliefs instead of DST output
    bool delex_history = true;     // system turns enter prompts delexicalized
    InformSuccessFn evaluator;     // replaces the built-in inform/success when set
    std::vector<std::shared_ptr<ResponseScorer>> scorers;
    std::string label = "schemabot";
};

struct DialogRow {
    std::string id;
    bool inform = false;
    bool success = false;
    std::size_t turns = 0;
    std::size_t completed = 0;
    std::string error;  // empty when the dialog ran to the end
    std::vector<TurnRecord> records;
};

struct EvalReport {
    std::string label;
    double inform = 0.0;
    double success = 0.0;
    double bleu = 0.0;
    double combined = 0.0;
    std::map<std::string, double> extra;
    std::vector<DialogRow> rows;  // sorted by id
    std::chrono::milliseconds runtime{0};
    long prompt_tokens = 0;
    long completion_tokens = 0;
};

EvalReport run_e2e_eval(std::span<const EvalDialog> corpus, std::shared_ptr<const Engine> engine,
                        const EvalConfig& config);

nlohmann::json to_json(const EvalReport& r);
// One JSON object per dialog, newline-terminated, without timings.
std::string transcript_jsonl(const EvalReport& r);
// Columns: label, Inform, Success, BLEU, Combined.
std::string format_table(std::span<const EvalReport> reports);

struct ActionReport {
    std::string label;
    double weighted_f1 = 0.0;
    double accuracy = 0.0;
    std::size_t examples = 0;
    std::vector<DialogRow> rows;
    std::chrono::milliseconds runtime{0};
};

// Scores each turn with a gold_action against the pipeline's predicted action.
ActionReport run_action_eval(std::span<const EvalDialog> corpus, std::shared_ptr<const Engine> engine,
                             const EvalConfig& config);

nlohmann::json to_json(const ActionReport& r);

// Completions that replay a dialog's gold outputs, in the order the pipeline
// requests them under `config`.
std::vector<std::string> oracle_completions(const EvalDialog& d, const PipelineConfig& config);

}  // namespace schemabot
