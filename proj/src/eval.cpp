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

#include "schemabot/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "schemabot/text.hpp"

namespace schemabot {

using nlohmann::json;

// ---- corpus -----------------------------------------------------------------

namespace {

std::vector<std::string> label_list(const json& j) {
    std::vector<std::string> out;
    if (j.is_string()) return make_action(j.get<std::string>()).labels;
    if (!j.is_array()) throw SyntaxError(0, "gold_action must be a string or an array of strings");
    for (const auto& v : j) {
        if (!v.is_string()) throw SyntaxError(0, "gold_action entries must be strings");
        for (auto& l : make_action(v.get<std::string>()).labels) out.push_back(std::move(l));
    }
    return out;
}

std::string str_field(const json& j, const char* key, bool required) {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) {
        if (required) throw SyntaxError(0, std::string("missing field '") + key + "'");
        return {};
    }
    if (!it->is_string()) throw SyntaxError(0, std::string("field '") + key + "' must be a string");
    return it->get<std::string>();
}

}  // namespace

EvalDialog dialog_from_json(const json& j) {
    if (!j.is_object()) throw SyntaxError(0, "dialog must be a JSON object");
    EvalDialog d;
    d.id = str_field(j, "id", true);
    if (auto g = j.find("goal"); g != j.end() && !g->is_null()) {
        if (!g->is_object()) throw SyntaxError(0, "goal must be an object keyed by domain");
        for (const auto& [domain, spec] : g->items()) {
            GoalSpec gs;
            if (auto c = spec.find("constraints"); c != spec.end()) {
                for (const auto& [slot, value] : c->items()) {
                    if (!value.is_string()) throw SyntaxError(0, "goal constraint values must be strings");
                    gs.constraints[text::canonical_identifier(slot)] = value.get<std::string>();
                }
            }
            if (auto r = spec.find("requests"); r != spec.end()) {
                for (const auto& slot : *r) gs.requests.push_back(text::canonical_identifier(slot.get<std::string>()));
            }
            d.goal[text::canonical_identifier(domain)] = std::move(gs);
        }
    }
    auto turns = j.find("turns");
    if (turns == j.end() || !turns->is_array()) throw SyntaxError(0, "dialog needs a 'turns' array");
    for (const auto& t : *turns) {
        EvalTurn et;
        et.user = str_field(t, "user", true);
        et.gold_belief_sql = str_field(t, "gold_belief_sql", false);
        if (auto a = t.find("gold_action"); a != t.end() && !a->is_null()) et.gold_action = label_list(*a);
        et.gold_response_delex = str_field(t, "gold_response_delex", false);
        d.turns.push_back(std::move(et));
    }
    return d;
}

std::vector<EvalDialog> parse_corpus(std::string_view jsonl) {
    std::vector<EvalDialog> out;
    std::size_t line_no = 0;
    std::size_t offset = 0;
    for (const auto& line : text::split_lines(jsonl)) {
        ++line_no;
        const std::size_t here = offset;
        offset += line.size() + 1;
        if (text::trim(line).empty()) continue;
        try {
            out.push_back(dialog_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw SyntaxError(here, "corpus line " + std::to_string(line_no) + ": " + e.what());
        } catch (const SyntaxError& e) {
            throw SyntaxError(here, "corpus line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

std::vector<EvalDialog> load_corpus(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read corpus file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_corpus(ss.str());
}

void check_dialog(const EvalDialog& d, std::span<const TaskSchema> schemas) {
    for (const auto& [domain, goal] : d.goal) {
        const TaskSchema* s = find_schema(schemas, domain);
        if (!s) throw UnknownDomain("dialog '" + d.id + "': goal domain '" + domain + "' is not bound");
        for (const auto& [slot, _] : goal.constraints) {
            if (!s->belief.find_slot(slot)) throw UnknownSlot(domain, slot);
        }
        for (const auto& slot : goal.requests) {
            if (!s->belief.find_slot(slot)) throw UnknownSlot(domain, slot);
        }
    }
}

// ---- metrics ----------------------------------------------------------------

InformSuccess inform_success(const EvalDialog& dialog, std::span<const TurnRecord> transcript,
                             std::span<const TaskSchema> schemas, const Canonicalizer& canon) {
    if (transcript.size() != dialog.turns.size()) {
        throw Misalignment("dialog '" + dialog.id + "' has " + std::to_string(dialog.turns.size()) +
                           " user turns but the transcript has " + std::to_string(transcript.size()));
    }
    InformSuccess out{true, true};
    for (const auto& [domain, goal] : dialog.goal) {
        const TurnRecord* last = nullptr;
        for (const auto& r : transcript) {
            if (r.belief.domain == domain) last = &r;
        }
        bool ok = last && last->db_top;
        if (ok) {
            for (const auto& [slot, wanted] : goal.constraints) {
                const std::string want = canon.canonical(wanted);
                if (want == kDontCare) continue;
                const std::string* have = last->db_top->get(slot);
                if (!have || canon.canonical(*have) != want) {
                    ok = false;
                    break;
                }
            }
        }
        if (!ok) out.inform = false;

        const TaskSchema* s = find_schema(schemas, domain);
        for (const auto& slot : goal.requests) {
            const SlotSpec* spec = s ? s->belief.find_slot(slot) : nullptr;
            const std::string token = "[" + (spec ? spec->placeholder : "value_" + slot) + "]";
            const bool delivered = std::any_of(transcript.begin(), transcript.end(), [&](const TurnRecord& r) {
                return text::to_lower(r.delex.text).find(token) != std::string::npos;
            });
            if (!delivered) out.success = false;
        }
    }
    out.success = out.success && out.inform;
    return out;
}

std::vector<std::string> bleu_tokens(std::string_view s) {
    std::string spaced;
    spaced.reserve(s.size() + 8);
    for (char c : text::to_lower(s)) {
        if (c == '.' || c == ',' || c == '?' || c == '!') {
            spaced += ' ';
            spaced += c;
            spaced += ' ';
        } else {
            spaced += c;
        }
    }
    return text::split_whitespace(spaced);
}

namespace {

constexpr int kMaxOrder = 4;

using NgramCounts = std::map<std::vector<std::string>, int>;

NgramCounts count_ngrams(const std::vector<std::string>& toks, int n) {
    NgramCounts counts;
    for (std::size_t i = 0; i + n <= toks.size(); ++i) {
        ++counts[std::vector<std::string>(toks.begin() + i, toks.begin() + i + n)];
    }
    return counts;
}

}  // namespace

double corpus_bleu(std::span<const std::string> hypotheses, std::span<const std::string> references) {
    if (hypotheses.size() != references.size()) {
        throw LengthMismatch(std::to_string(hypotheses.size()) + " hypotheses vs " +
                             std::to_string(references.size()) + " references");
    }
    if (hypotheses.empty()) throw EmptyInput("BLEU needs at least one pair");

    long hyp_len = 0;
    long ref_len = 0;
    long matched[kMaxOrder] = {0, 0, 0, 0};
    long total[kMaxOrder] = {0, 0, 0, 0};
    for (std::size_t i = 0; i < hypotheses.size(); ++i) {
        const auto hyp = bleu_tokens(hypotheses[i]);
        const auto ref = bleu_tokens(references[i]);
        hyp_len += static_cast<long>(hyp.size());
        ref_len += static_cast<long>(ref.size());
        for (int n = 1; n <= kMaxOrder; ++n) {
            const NgramCounts h = count_ngrams(hyp, n);
            const NgramCounts r = count_ngrams(ref, n);
            for (const auto& [gram, c] : h) {
                total[n - 1] += c;
                if (auto it = r.find(gram); it != r.end()) matched[n - 1] += std::min(c, it->second);
            }
        }
    }
    if (hyp_len == 0) return 0.0;
    double log_sum = 0.0;
    for (int n = 0; n < kMaxOrder; ++n) {
        if (matched[n] == 0) return 0.0;
        log_sum += std::log(static_cast<double>(matched[n]) / static_cast<double>(total[n]));
    }
    const double bp = hyp_len < ref_len ? std::exp(1.0 - static_cast<double>(ref_len) / hyp_len) : 1.0;
    return 100.0 * bp * std::exp(log_sum / kMaxOrder);
}

double combined(double inform, double success, double bleu) {
    auto check = [](double v, const char* what) {
        if (!(v >= 0.0 && v <= 100.0)) {
            std::ostringstream os;
            os << what << " = " << v << " is outside [0, 100]";
            throw OutOfRange(os.str());
        }
    };
    check(inform, "inform");
    check(success, "success");
    check(bleu, "bleu");
    return 0.5 * (inform + success) + bleu;
}

ActionScores next_action_scores(std::span<const std::vector<std::string>> gold,
                                std::span<const std::vector<std::string>> predicted) {
    if (gold.size() != predicted.size()) {
        throw LengthMismatch(std::to_string(gold.size()) + " gold vs " + std::to_string(predicted.size()) +
                             " predicted label sets");
    }
    if (gold.empty()) throw EmptyInput("no examples to score");

    struct Tally {
        long tp = 0, fp = 0, fn = 0;
    };
    std::map<std::string, Tally> tally;
    long exact = 0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        const std::set<std::string> g(gold[i].begin(), gold[i].end());
        const std::set<std::string> p(predicted[i].begin(), predicted[i].end());
        if (g == p) ++exact;
        for (const auto& l : g) (p.count(l) ? tally[l].tp : tally[l].fn) += 1;
        for (const auto& l : p) {
            if (!g.count(l)) tally[l].fp += 1;
        }
    }
    double weighted = 0.0;
    long support_total = 0;
    for (const auto& [label, t] : tally) {
        const long support = t.tp + t.fn;
        if (support == 0) continue;
        const double f1 = 2.0 * t.tp / static_cast<double>(2 * t.tp + t.fp + t.fn);
        weighted += f1 * support;
        support_total += support;
    }
    ActionScores out;
    out.weighted_f1 = support_total ? 100.0 * weighted / support_total : 0.0;
    out.accuracy = 100.0 * exact / static_cast<double>(gold.size());
    return out;
}

// ---- harness ----------------------------------------------------------------

namespace {

DialogRow replay(const EvalDialog& d, const std::shared_ptr<const Engine>& engine, const EvalConfig& cfg) {
    DialogRow row;
    row.id = d.id;
    row.turns = d.turns.size();
    try {
        if (!cfg.backend_factory) throw ConfigError("evaluation needs a backend factory");
        check_dialog(d, engine->schemas);
        DialogSession session = open_session(engine, cfg.backend_factory(d), {}, d.id);
        for (const auto& t : d.turns) {
            std::optional<BeliefState> forced;
            if (cfg.teacher_forcing) forced = parse_belief_sql(t.gold_belief_sql, session.schemas, engine->canon);
            step(session, t.user, forced);
            ++row.completed;
        }
        row.records = std::move(session.records);
    } catch (const std::exception& e) {
        row.error = e.what();
    }
    return row;
}

std::vector<DialogRow> replay_all(std::span<const EvalDialog> corpus, std::shared_ptr<const Engine> engine,
                                  const EvalConfig& cfg) {
    if (engine->config.delex_history != cfg.delex_history) {
        auto copy = std::make_shared<Engine>(*engine);
        copy->config.delex_history = cfg.delex_history;
        engine = std::move(copy);
    }
    std::vector<DialogRow> rows(corpus.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < corpus.size(); i = next++) rows[i] = replay(corpus[i], engine, cfg);
    };
    const std::size_t n = std::clamp<std::size_t>(cfg.workers, 1, std::max<std::size_t>(corpus.size(), 1));
    std::vector<std::thread> pool;
    for (std::size_t i = 1; i < n; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    std::sort(rows.begin(), rows.end(), [](const DialogRow& a, const DialogRow& b) { return a.id < b.id; });
    return rows;
}

}  // namespace

EvalReport run_e2e_eval(std::span<const EvalDialog> corpus, std::shared_ptr<const Engine> engine,
                        const EvalConfig& config) {
    if (corpus.empty()) throw EmptyInput("evaluation corpus is empty");
    if (!engine) throw InvalidArgument("evaluation needs an engine");
    const auto start = std::chrono::steady_clock::now();

    EvalReport rep;
    rep.label = config.label;
    rep.rows = replay_all(corpus, engine, config);

    std::map<std::string, const EvalDialog*> by_id;
    for (const auto& d : corpus) by_id[d.id] = &d;

    std::vector<std::string> hyps;
    std::vector<std::string> refs;
    std::size_t informed = 0;
    std::size_t succeeded = 0;
    for (auto& row : rep.rows) {
        const EvalDialog& d = *by_id.at(row.id);
        if (row.error.empty()) {
            const InformSuccess is = config.evaluator ? config.evaluator(d, row.records)
                                                      : inform_success(d, row.records, engine->schemas, engine->canon);
            row.inform = is.inform;
            row.success = is.success && is.inform;
        }
        informed += row.inform;
        succeeded += row.success;
        for (std::size_t i = 0; i < d.turns.size(); ++i) {
            hyps.push_back(i < row.records.size() ? row.records[i].delex.text : std::string());
            refs.push_back(d.turns[i].gold_response_delex);
        }
        for (const auto& r : row.records) {
            rep.prompt_tokens += r.prompt_tokens;
            rep.completion_tokens += r.completion_tokens;
        }
    }
    const double n = static_cast<double>(rep.rows.size());
    rep.inform = 100.0 * informed / n;
    rep.success = 100.0 * succeeded / n;
    rep.bleu = hyps.empty() ? 0.0 : corpus_bleu(hyps, refs);
    rep.combined = combined(rep.inform, rep.success, rep.bleu);
    for (const auto& s : config.scorers) rep.extra[s->name()] = s->score(hyps, refs);
    rep.runtime = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
    return rep;
}

namespace {

json rows_json(const std::vector<DialogRow>& rows, bool with_scores) {
    json out = json::array();
    for (const auto& r : rows) {
        json j{{"id", r.id}, {"turns", r.turns}, {"completed", r.completed}};
        if (with_scores) {
            j["inform"] = r.inform;
            j["success"] = r.success;
        }
        j["error"] = r.error.empty() ? json(nullptr) : json(r.error);
        out.push_back(std::move(j));
    }
    return out;
}

}  // namespace

json to_json(const EvalReport& r) {
    return json{{"label", r.label},
                {"inform", r.inform},
                {"success", r.success},
                {"bleu", r.bleu},
                {"combined", r.combined},
                {"extra", r.extra},
                {"dialogs", rows_json(r.rows, true)},
                {"runtime_ms", r.runtime.count()},
                {"usage", {{"prompt_tokens", r.prompt_tokens}, {"completion_tokens", r.completion_tokens}}}};
}

std::string transcript_jsonl(const EvalReport& r) {
    std::string out;
    for (const auto& row : r.rows) {
        json turns = json::array();
        for (const auto& rec : row.records) turns.push_back(to_json(rec, false));
        json j{{"id", row.id},
               {"inform", row.inform},
               {"success", row.success},
               {"error", row.error.empty() ? json(nullptr) : json(row.error)},
               {"turns", std::move(turns)}};
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::string format_table(std::span<const EvalReport> reports) {
    std::size_t w = 5;
    for (const auto& r : reports) w = std::max(w, r.label.size());
    std::ostringstream os;
    os << std::left << std::setw(static_cast<int>(w)) << "Model" << std::right << std::setw(9) << "Inform"
       << std::setw(9) << "Success" << std::setw(9) << "BLEU" << std::setw(10) << "Combined" << "\n";
    os << std::fixed << std::setprecision(2);
    for (const auto& r : reports) {
        os << std::left << std::setw(static_cast<int>(w)) << r.label << std::right << std::setw(9) << r.inform
           << std::setw(9) << r.success << std::setw(9) << r.bleu << std::setw(10) << r.combined << "\n";
    }
    return os.str();
}

ActionReport run_action_eval(std::span<const EvalDialog> corpus, std::shared_ptr<const Engine> engine,
                             const EvalConfig& config) {
    if (corpus.empty()) throw EmptyInput("evaluation corpus is empty");
    if (!engine) throw InvalidArgument("evaluation needs an engine");
    const auto start = std::chrono::steady_clock::now();

    ActionReport rep;
    rep.label = config.label;
    rep.rows = replay_all(corpus, engine, config);

    std::map<std::string, const EvalDialog*> by_id;
    for (const auto& d : corpus) by_id[d.id] = &d;
    std::vector<std::vector<std::string>> gold;
    std::vector<std::vector<std::string>> pred;
    for (const auto& row : rep.rows) {
        const EvalDialog& d = *by_id.at(row.id);
        for (std::size_t i = 0; i < d.turns.size(); ++i) {
            if (!d.turns[i].gold_action) continue;
            gold.push_back(*d.turns[i].gold_action);
            pred.push_back(i < row.records.size() ? row.records[i].action.labels : std::vector<std::string>{});
        }
    }
    rep.examples = gold.size();
    if (!gold.empty()) {
        const ActionScores s = next_action_scores(gold, pred);
        rep.weighted_f1 = s.weighted_f1;
        rep.accuracy = s.accuracy;
    }
    rep.runtime = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
    return rep;
}

json to_json(const ActionReport& r) {
    return json{{"label", r.label},
                {"weighted_f1", r.weighted_f1},
                {"accuracy", r.accuracy},
                {"examples", r.examples},
                {"dialogs", rows_json(r.rows, false)},
                {"runtime_ms", r.runtime.count()}};
}

std::vector<std::string> oracle_completions(const EvalDialog& d, const PipelineConfig& config) {
    std::vector<std::string> out;
    for (const auto& t : d.turns) {
        if (config.use_dst_prompter) out.push_back(t.gold_belief_sql);
        const std::string action =
            std::string(kActionMarker) + " " + (t.gold_action ? text::join(*t.gold_action, " ") : std::string());
        const std::string response = std::string(kResponseMarker) + " " + t.gold_response_delex;
        if (config.combined_action_response) {
            out.push_back(action + "\n" + response);
        } else {
            out.push_back(action);
            out.push_back(response);
        }
    }
    return out;
}

}  // namespace schemabot
