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

#include "schemabot/belief.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <optional>
#include <sstream>

#include <nlohmann/json.hpp>

#include "schemabot/text.hpp"

namespace schemabot {

std::string DialogHistory::render() const {
    std::string out;
    for (const auto& t : turns) {
        out += t.speaker == Speaker::kUser ? "User: " : "System: ";
        std::string line(text::trim(t.text));
        std::replace(line.begin(), line.end(), '\n', ' ');
        std::replace(line.begin(), line.end(), '\r', ' ');
        out += line;
        out += '\n';
    }
    return out;
}

const std::string* BeliefState::find(std::string_view slot) const {
    for (const auto& [s, v] : pairs) {
        if (s == slot) return &v;
    }
    return nullptr;
}

void BeliefState::set(std::string slot, std::string value) {
    for (auto& [s, v] : pairs) {
        if (s == slot) {
            v = std::move(value);
            return;
        }
    }
    pairs.emplace_back(std::move(slot), std::move(value));
}

Canonicalizer::Canonicalizer(std::map<std::string, std::string> table) {
    for (auto& [from, to] : table) table_[text::normalize(from)] = text::normalize(to);
}

Canonicalizer Canonicalizer::from_json(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw SyntaxError(e.byte, e.what());
    }
    const nlohmann::json& map = j.contains("values") ? j.at("values") : j;
    if (!map.is_object()) throw ConfigError("canonicalization table must be a JSON object");
    std::map<std::string, std::string> table;
    for (const auto& [k, v] : map.items()) {
        if (!v.is_string()) throw ConfigError("canonical value for '" + k + "' must be a string");
        table[k] = v.get<std::string>();
    }
    return Canonicalizer(std::move(table));
}

Canonicalizer Canonicalizer::from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open canonicalization table '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

std::string Canonicalizer::canonical(std::string_view value) const {
    std::string v = text::normalize(value);
    if (auto it = table_.find(v); it != table_.end()) return it->second;
    return v;
}

std::string DstPrompt::render() const {
    std::string out;
    out += task_instruction;
    out += "\n\nBelief instructions:\n";
    out += belief_instructions;
    out += "\nFormatting example:\n";
    out += formatting_example;
    if (!formatting_example.empty() && formatting_example.back() != '\n') out += '\n';
    out += "\nTest input:\n";
    out += test_input;
    return out;
}

std::string render_belief_instruction(const BeliefInstruction& bi) {
    std::string out = "[" + bi.domain + "]\n";
    for (const auto& slot : bi.slots) {
        out += "- " + slot.name;
        if (slot.kind == SlotKind::kCategorical) {
            std::vector<std::string> values = slot.values;
            if (std::find(values.begin(), values.end(), kDontCare) == values.end()) {
                values.emplace_back(kDontCare);
            }
            out += ": one of " + text::join(values, ", ");
        } else if (!slot.values.empty()) {
            out += ": e.g. " + text::join(slot.values, ", ");
        }
        out += '\n';
    }
    return out;
}

namespace {

void check_history(const DialogHistory& history) {
    for (const auto& t : history.turns) {
        if (text::trim(t.text).empty()) throw InvalidArgument("dialog turn text is empty");
    }
    if (!history.turns.empty() && history.turns.back().speaker != Speaker::kUser) {
        throw InvalidArgument("the last turn of the history must be a user turn");
    }
}

}  // namespace

DstPrompt build_dst_prompt(std::span<const TaskSchema> schemas, const DialogHistory& history,
                           std::string_view formatting_example) {
    if (schemas.empty()) throw EmptySchemaSet("at least one task schema is required");
    check_history(history);
    DstPrompt p;
    p.task_instruction = schemas.front().task_instruction_dst;
    for (std::size_t i = 0; i < schemas.size(); ++i) {
        if (i > 0) p.belief_instructions += '\n';
        p.belief_instructions += render_belief_instruction(schemas[i].belief);
    }
    p.formatting_example = std::string(formatting_example);
    p.test_input = history.render() + "Belief state:";
    return p;
}

// ---- SQL grammar ------------------------------------------------------------

namespace {

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_'; }
bool is_blank(char c) { return c == ' ' || c == '\t'; }
bool is_ws(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

class SqlCursor {
  public:
    SqlCursor(std::string_view s, std::size_t pos) : s_(s), pos_(pos) {}

    std::size_t pos() const { return pos_; }
    bool done() const { return pos_ >= s_.size(); }
    char peek() const { return done() ? '\0' : s_[pos_]; }

    void skip_ws() {
        while (!done() && is_ws(s_[pos_])) ++pos_;
    }
    void skip_blanks() {
        while (!done() && is_blank(s_[pos_])) ++pos_;
    }

    bool keyword(std::string_view kw) {
        if (s_.size() - pos_ < kw.size()) return false;
        if (!text::iequals(s_.substr(pos_, kw.size()), kw)) return false;
        const std::size_t end = pos_ + kw.size();
        if (end < s_.size() && is_word_char(s_[end])) return false;
        pos_ = end;
        return true;
    }

    bool literal(char c) {
        if (peek() != c) return false;
        ++pos_;
        return true;
    }

    std::optional<std::string> word() {
        const std::size_t start = pos_;
        while (!done() && is_word_char(s_[pos_])) ++pos_;
        if (pos_ == start) return std::nullopt;
        return std::string(s_.substr(start, pos_ - start));
    }

    // Quoted or bare value; bare values stop at ';', a line break, a
    // backtick, or sentence punctuation followed by whitespace/end of text.
    std::optional<std::string> value() {
        const char q = peek();
        if (q == '\'' || q == '"') {
            const std::size_t close = s_.find(q, pos_ + 1);
            if (close == std::string_view::npos) return std::nullopt;
            std::string v(s_.substr(pos_ + 1, close - pos_ - 1));
            pos_ = close + 1;
            if (v.find('\n') != std::string::npos) return std::nullopt;
            return v;
        }
        const std::size_t start = pos_;
        while (!done()) {
            const char c = s_[pos_];
            if (c == ';' || c == '\n' || c == '\r' || c == '`') break;
            if (c == '.' || c == '!' || c == '?') {
                const std::size_t next = pos_ + 1;
                if (next >= s_.size() || is_ws(s_[next])) break;
            }
            ++pos_;
        }
        std::string_view v = text::trim(s_.substr(start, pos_ - start));
        if (v.empty()) return std::nullopt;
        return std::string(v);
    }

  private:
    std::string_view s_;
    std::size_t pos_;
};

std::optional<BeliefState> parse_pairs(SqlCursor c, BeliefState b) {
    while (true) {
        c.skip_ws();
        auto slot = c.word();
        if (!slot) return std::nullopt;
        c.skip_blanks();
        if (!c.literal('=')) return std::nullopt;
        c.skip_blanks();
        auto value = c.value();
        if (!value) return std::nullopt;
        const std::string v = text::normalize(*value);
        if (v.empty()) return std::nullopt;
        b.set(text::canonical_identifier(*slot), v);

        SqlCursor after = c;
        after.skip_blanks();
        if (!after.literal(';')) break;
        // A trailing ';' (or one followed by prose) ends the statement.
        SqlCursor probe = after;
        probe.skip_ws();
        if (!probe.word()) break;
        probe.skip_blanks();
        if (!probe.literal('=')) break;
        c = after;
    }
    return b;
}

std::optional<BeliefState> parse_statement(std::string_view s, std::size_t at) {
    SqlCursor c(s, at);
    if (!c.keyword("select")) return std::nullopt;
    c.skip_ws();
    if (!c.literal('*')) return std::nullopt;
    c.skip_ws();
    if (!c.keyword("from")) return std::nullopt;
    c.skip_ws();
    auto domain = c.word();
    if (!domain) return std::nullopt;

    BeliefState b;
    b.domain = text::canonical_identifier(*domain);

    SqlCursor look = c;
    look.skip_blanks();
    const bool same_line = look.keyword("where");
    if (!same_line) {
        look.skip_ws();
        if (!look.keyword("where")) return b;
    }
    auto with_pairs = parse_pairs(look, b);
    if (with_pairs) return with_pairs;
    // "where" on a following line that does not continue the statement is prose.
    if (!same_line) return b;
    return std::nullopt;
}

bool needs_quotes(std::string_view v) {
    if (v.empty()) return true;
    if (v.front() == '\'' || v.front() == '"') return true;
    for (std::size_t i = 0; i < v.size(); ++i) {
        const char c = v[i];
        if (c == ';' || c == '\n' || c == '\r' || c == '`' || c == '"' || c == '\'') return true;
        if ((c == '.' || c == '!' || c == '?') && (i + 1 == v.size() || is_ws(v[i + 1]))) return true;
    }
    return false;
}

}  // namespace

BeliefState parse_belief_sql_unchecked(std::string_view completion) {
    std::size_t pos = 0;
    while (true) {
        std::size_t best = std::string_view::npos;
        for (std::size_t i = pos; i + 6 <= completion.size(); ++i) {
            if ((i == 0 || !is_word_char(completion[i - 1])) &&
                text::iequals(completion.substr(i, 6), "select")) {
                best = i;
                break;
            }
        }
        if (best == std::string_view::npos) break;
        if (auto b = parse_statement(completion, best)) return *b;
        pos = best + 6;
    }
    throw ParseFailure("no well-formed 'select * from <domain>' statement found");
}

const TaskSchema* find_schema(std::span<const TaskSchema> schemas, std::string_view domain) {
    for (const auto& s : schemas) {
        if (text::iequals(s.domain, domain)) return &s;
    }
    return nullptr;
}

void check_belief(const BeliefState& b, std::span<const TaskSchema> schemas) {
    const TaskSchema* schema = find_schema(schemas, b.domain);
    if (!schema) throw UnknownDomain("domain '" + b.domain + "' has no bound schema");
    for (std::size_t i = 0; i < b.pairs.size(); ++i) {
        const auto& [slot, value] = b.pairs[i];
        const SlotSpec* spec = schema->belief.find_slot(slot);
        if (!spec) throw UnknownSlot(b.domain, slot);
        for (std::size_t j = 0; j < i; ++j) {
            if (b.pairs[j].first == slot) throw InvalidValue("slot '" + slot + "' appears twice");
        }
        if (value.empty()) throw InvalidValue("slot '" + slot + "' has an empty value");
        if (value.find('"') != std::string::npos && value.find('\'') != std::string::npos) {
            throw InvalidValue("value for '" + slot + "' mixes both quote characters");
        }
        if (spec->kind == SlotKind::kCategorical && value != kDontCare) {
            const bool legal = std::any_of(spec->values.begin(), spec->values.end(),
                                           [&](const std::string& v) { return text::iequals(v, value); });
            if (!legal) {
                throw InvalidValue("'" + value + "' is not a legal value of categorical slot '" + slot + "'");
            }
        }
    }
}

BeliefState parse_belief_sql(std::string_view completion, std::span<const TaskSchema> schemas,
                             const Canonicalizer& canon) {
    BeliefState raw = parse_belief_sql_unchecked(completion);
    BeliefState b;
    b.domain = raw.domain;
    const TaskSchema* schema = find_schema(schemas, b.domain);
    if (!schema) throw UnknownDomain("domain '" + b.domain + "' has no bound schema");
    for (auto& [slot, value] : raw.pairs) {
        if (!schema->belief.find_slot(slot)) throw UnknownSlot(b.domain, slot);
        b.set(slot, canon.canonical(value));
    }
    check_belief(b, schemas);
    return b;
}

std::string render_belief_sql(const BeliefState& b) {
    std::string out = "select * from " + b.domain;
    for (std::size_t i = 0; i < b.pairs.size(); ++i) {
        out += i == 0 ? " where " : "; ";
        const auto& [slot, value] = b.pairs[i];
        out += slot + " = ";
        if (needs_quotes(value)) {
            const char q = value.find('"') == std::string::npos ? '"' : '\'';
            out += q + value + q;
        } else {
            out += value;
        }
    }
    return out;
}

}  // namespace schemabot
