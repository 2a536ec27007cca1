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

#include <algorithm>
#include <cctype>
#include <set>

#include "schemabot/belief.hpp"
#include "schemabot/error.hpp"
#include "schemabot/llm.hpp"
#include "schemabot/policy.hpp"
#include "schemabot/schema.hpp"
#include "schemabot/text.hpp"

namespace schemabot {

namespace {

constexpr std::string_view kBeliefSection = "\nBelief instructions:\n";
constexpr std::string_view kFormattingSection = "\nFormatting example:\n";
constexpr std::string_view kSkeletonSection = "\nPolicy skeleton:\n";
constexpr std::string_view kTestSection = "\nTest input:\n";

const std::set<std::string>& stopwords() {
    static const std::set<std::string> words = {
        "a",     "an",   "the",  "i",      "im",    "me",     "my",    "we",    "you",   "your",
        "is",    "are",  "am",   "be",     "was",   "it",     "its",   "to",    "for",   "of",
        "in",    "on",   "at",   "and",    "or",    "that",   "this",  "there", "please", "can",
        "could", "would", "will", "do",    "does",  "did",    "with",  "some",  "any",   "need",
        "want",  "like", "looking", "also", "hi",   "hello",  "thanks", "thank", "just",  "so",
        "what",  "which", "one",  "get",   "about", "have",   "has",   "they",  "their", "them",
        "place", "find", "know", "tell",   "yes",   "ok",     "okay",  "let",   "s",     "d",
        "ll",    "m",    "re",   "t",      "am",    "from",   "by",    "as"};
    return words;
}

// Lowercase text with every non-alphanumeric character turned into a space,
// padded so phrase search can use " value " boundaries.
std::string padded_words(std::string_view s) {
    std::string out = " ";
    for (char c : s) {
        const unsigned char u = static_cast<unsigned char>(c);
        out.push_back(std::isalnum(u) ? static_cast<char>(std::tolower(u)) : ' ');
    }
    out.push_back(' ');
    std::string collapsed;
    for (char c : out) {
        if (c == ' ' && !collapsed.empty() && collapsed.back() == ' ') continue;
        collapsed.push_back(c);
    }
    return collapsed;
}

bool contains_phrase(const std::string& padded_text, std::string_view phrase) {
    std::string p = padded_words(phrase);
    if (p.size() <= 2) return false;
    return padded_text.find(p) != std::string::npos;
}

std::set<std::string> content_tokens(std::string_view s) {
    std::string stripped;
    int depth = 0;
    for (char c : s) {
        if (c == '[') ++depth;
        if (depth == 0) stripped.push_back(c);
        if (c == ']' && depth > 0) --depth;
    }
    std::set<std::string> out;
    for (auto& w : text::split_whitespace(padded_words(stripped))) {
        if (!stopwords().count(w)) out.insert(w);
    }
    return out;
}

double jaccard(const std::set<std::string>& a, const std::set<std::string>& b) {
    if (a.empty() || b.empty()) return 0.0;
    std::size_t common = 0;
    for (const auto& w : a) common += b.count(w);
    return static_cast<double>(common) / static_cast<double>(a.size() + b.size() - common);
}

std::string_view section(std::string_view prompt, std::string_view begin, std::string_view end) {
    const std::size_t b = prompt.find(begin);
    if (b == std::string_view::npos) return {};
    const std::size_t start = b + begin.size();
    const std::size_t e = end.empty() ? std::string_view::npos : prompt.find(end, start);
    return prompt.substr(start, e == std::string_view::npos ? std::string_view::npos : e - start);
}

std::string_view test_input(std::string_view prompt) {
    const std::size_t b = prompt.rfind(kTestSection);
    if (b == std::string_view::npos) return {};
    return prompt.substr(b + kTestSection.size());
}

std::vector<std::string> user_lines(std::string_view input) {
    std::vector<std::string> out;
    for (const auto& line : text::split_lines(input)) {
        if (text::istarts_with(line, "User:")) out.emplace_back(text::trim(std::string_view(line).substr(5)));
    }
    return out;
}

struct SlotValues {
    std::string slot;
    std::vector<std::string> values;  // longest first
};

struct DomainInstruction {
    std::string domain;
    std::vector<SlotValues> slots;
};

std::vector<DomainInstruction> parse_belief_instructions(std::string_view block) {
    std::vector<DomainInstruction> out;
    for (const auto& raw : text::split_lines(block)) {
        std::string_view line = text::trim(raw);
        if (line.size() > 2 && line.front() == '[' && line.back() == ']') {
            out.push_back({std::string(line.substr(1, line.size() - 2)), {}});
            continue;
        }
        if (out.empty() || !line.starts_with("- ")) continue;
        line.remove_prefix(2);
        SlotValues sv;
        const std::size_t colon = line.find(':');
        sv.slot = std::string(text::trim(line.substr(0, colon)));
        if (colon != std::string_view::npos) {
            std::string_view rest = text::trim(line.substr(colon + 1));
            if (rest.starts_with("one of ")) rest.remove_prefix(7);
            if (rest.starts_with("e.g. ")) rest.remove_prefix(5);
            std::string list(rest);
            std::size_t start = 0;
            while (start <= list.size()) {
                const std::size_t comma = list.find(',', start);
                std::string v(text::trim(std::string_view(list).substr(
                    start, comma == std::string::npos ? std::string::npos : comma - start)));
                if (!v.empty() && v != kDontCare) sv.values.push_back(v);
                if (comma == std::string::npos) break;
                start = comma + 1;
            }
        }
        std::stable_sort(sv.values.begin(), sv.values.end(),
                         [](const std::string& a, const std::string& b) { return a.size() > b.size(); });
        out.back().slots.push_back(std::move(sv));
    }
    return out;
}

struct SkeletonTurn {
    std::string id;
    std::optional<std::string> user;
    std::optional<MatchCount> match_count;
    std::vector<std::pair<std::string, std::string>> constraints;
    std::string action;
    std::string response;
};

std::vector<SkeletonTurn> parse_skeleton(std::string_view block) {
    std::vector<SkeletonTurn> out;
    for (const auto& raw : text::split_lines(block)) {
        std::string_view line = text::trim(raw);
        if (line.starts_with("Turn ") && line.ends_with(":")) {
            out.push_back({});
            out.back().id = std::string(line.substr(5, line.size() - 6));
            continue;
        }
        if (out.empty()) continue;
        SkeletonTurn& t = out.back();
        if (line.starts_with("User:")) {
            t.user = std::string(text::trim(line.substr(5)));
        } else if (line.starts_with("DB:")) {
            std::string_view rest = text::trim(line.substr(3));
            const std::size_t space = rest.find(' ');
            t.match_count = match_count_from_string(rest.substr(0, space));
            const std::size_t where = rest.find(" where ");
            if (where != std::string_view::npos) {
                try {
                    BeliefState b = parse_belief_sql_unchecked("select * from x" + std::string(rest.substr(where)));
                    t.constraints = b.pairs;
                } catch (const ParseFailure&) {
                }
            }
        } else if (line.starts_with(kActionMarker)) {
            t.action = std::string(text::trim(line.substr(kActionMarker.size())));
        } else if (line.starts_with(kResponseMarker)) {
            t.response = std::string(text::trim(line.substr(kResponseMarker.size())));
        }
    }
    return out;
}

}  // namespace

CompletionResult KeywordBackend::complete(const CompletionRequest& req) {
    if (req.prompt.empty()) throw InvalidArgument("completion prompt is empty");
    CompletionResult r;
    if (req.prompt.find(kBeliefSection) != std::string::npos) {
        r.text = answer_dst(req.prompt);
    } else if (req.prompt.find(kTestSection) != std::string::npos) {
        r.text = answer_policy(req.prompt);
    } else {
        throw ProviderError(0, "keyword backend does not recognise this prompt");
    }
    return r;
}

std::string KeywordBackend::answer_dst(std::string_view prompt) const {
    const auto domains = parse_belief_instructions(section(prompt, kBeliefSection, kFormattingSection));
    if (domains.empty()) throw ProviderError(0, "keyword backend found no belief instructions");
    const auto users = user_lines(test_input(prompt));

    std::vector<BeliefState> states(domains.size());
    std::size_t active = 0;
    for (const auto& utterance : users) {
        const std::string padded = padded_words(utterance);
        std::vector<int> score(domains.size(), 0);
        for (std::size_t d = 0; d < domains.size(); ++d) {
            states[d].domain = domains[d].domain;
            if (contains_phrase(padded, domains[d].domain)) score[d] += 2;
            for (const auto& slot : domains[d].slots) {
                for (const auto& v : slot.values) {
                    if (contains_phrase(padded, v)) {
                        states[d].set(slot.slot, v);
                        ++score[d];
                        break;
                    }
                }
            }
        }
        const auto best = std::max_element(score.begin(), score.end());
        if (*best > 0) active = static_cast<std::size_t>(best - score.begin());
    }
    states[active].domain = domains[active].domain;
    return render_belief_sql(states[active]);
}

std::string KeywordBackend::answer_policy(std::string_view prompt) const {
    const std::string_view input = test_input(prompt);
    const auto lines = text::split_lines(input);
    const std::string instruction = lines.empty() ? std::string() : lines.back();
    PolicyStage stage = PolicyStage::kAction;
    if (instruction.find("\"Action:\" and \"Response:\"") != std::string::npos) {
        stage = PolicyStage::kCombined;
    } else if (instruction.find("\"Response:\"") != std::string::npos) {
        stage = PolicyStage::kResponse;
    }

    const auto turns = parse_skeleton(section(prompt, kSkeletonSection, kTestSection));
    if (turns.empty()) {
        // No skeleton to follow.
        return "Action: general_inform\nResponse: is there anything else i can help you with?";
    }

    const auto users = user_lines(input);
    const std::string last_user = users.empty() ? std::string() : users.back();
    std::optional<BeliefState> belief;
    long count = -1;
    std::optional<std::string> given_action;
    for (const auto& line : lines) {
        if (line.starts_with("Belief state:")) {
            try {
                belief = parse_belief_sql_unchecked(line);
            } catch (const ParseFailure&) {
            }
        } else if (line.starts_with("DB state:")) {
            const std::string_view rest = text::trim(std::string_view(line).substr(9));
            if (rest.starts_with("no matching")) {
                count = 0;
            } else {
                count = std::strtol(std::string(rest).c_str(), nullptr, 10);
            }
        } else if (line.starts_with(kActionMarker)) {
            given_action = std::string(text::trim(std::string_view(line).substr(kActionMarker.size())));
        }
    }

    const SkeletonTurn* chosen = nullptr;
    if (stage == PolicyStage::kResponse && given_action) {
        for (const auto& t : turns) {
            if (text::iequals(t.action, *given_action)) {
                chosen = &t;
                break;
            }
        }
    }

    const std::string padded_user = padded_words(last_user);
    if (!chosen && belief && count >= 0) {
        const bool gives_constraint = std::any_of(belief->pairs.begin(), belief->pairs.end(), [&](const auto& p) {
            return contains_phrase(padded_user, p.second);
        });
        if (gives_constraint) {
            for (const auto& t : turns) {
                if (!t.match_count || !matches(*t.match_count, static_cast<std::size_t>(count))) continue;
                const bool satisfied = std::all_of(t.constraints.begin(), t.constraints.end(), [&](const auto& c) {
                    const std::string* v = belief->find(c.first);
                    return v && *v == c.second;
                });
                if (satisfied) {
                    chosen = &t;
                    break;
                }
            }
        }
    }
    if (!chosen) {
        const auto user_tokens = content_tokens(last_user);
        double best = 0.0;
        for (const auto& t : turns) {
            if (!t.user || t.id == kFallbackTurnId) continue;
            const double score = jaccard(user_tokens, content_tokens(*t.user));
            if (score > best) {
                best = score;
                chosen = &t;
            }
        }
        if (best < threshold_) chosen = nullptr;
    }
    if (!chosen) {
        for (const auto& t : turns) {
            if (t.id == kFallbackTurnId) chosen = &t;
        }
    }
    const std::string action = chosen ? chosen->action : "fallback";
    const std::string response = chosen ? chosen->response : "sorry, i can not help with that.";
    switch (stage) {
        case PolicyStage::kAction: return "Action: " + action;
        case PolicyStage::kResponse: return "Response: " + response;
        case PolicyStage::kCombined: return "Action: " + action + "\nResponse: " + response;
    }
    return {};
}

}  // namespace schemabot
