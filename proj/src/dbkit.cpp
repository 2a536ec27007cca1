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

#include "schemabot/dbkit.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <nlohmann/json.hpp>

#include "schemabot/text.hpp"

namespace schemabot {

using nlohmann::json;

const std::string* DbEntry::get(std::string_view slot) const {
    auto it = attributes.find(std::string(slot));
    return it == attributes.end() ? nullptr : &it->second;
}

DbTable::DbTable(std::string domain, std::vector<DbEntry> entries, std::vector<Diagnostic> warnings)
    : domain_(std::move(domain)), entries_(std::move(entries)), warnings_(std::move(warnings)) {}

DbTable load_db(std::string_view text, const TaskSchema* schema) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw SyntaxError(e.byte, e.what());
    }
    if (!doc.is_object()) throw SyntaxError(0, "DB file must be an object with 'domain' and 'entries'");
    auto dom = doc.find("domain");
    if (dom == doc.end() || !dom->is_string()) throw SyntaxError(0, "DB file is missing a string 'domain'");
    const std::string domain = text::canonical_identifier(dom->get<std::string>());
    if (schema && domain != schema->domain) {
        throw DomainMismatch("DB domain '" + domain + "' does not match schema domain '" + schema->domain + "'");
    }
    auto list = doc.find("entries");
    if (list == doc.end() || !list->is_array()) throw SyntaxError(0, "DB file is missing an 'entries' array");

    std::vector<DbEntry> entries;
    std::vector<Diagnostic> warnings;
    std::set<std::string> flagged;
    for (std::size_t i = 0; i < list->size(); ++i) {
        const json& e = (*list)[i];
        if (!e.is_object()) throw SyntaxError(0, "entry " + std::to_string(i) + " is not an object");
        DbEntry entry{domain, {}};
        for (const auto& [key, value] : e.items()) {
            std::string v;
            if (value.is_string()) {
                v = value.get<std::string>();
            } else if (value.is_number() || value.is_boolean()) {
                v = value.dump();
            } else {
                throw SyntaxError(0, "entry " + std::to_string(i) + " attribute '" + key +
                                         "' must be a string, number or boolean");
            }
            const std::string slot = text::canonical_identifier(key);
            if (!entry.attributes.emplace(slot, std::move(v)).second) {
                throw SyntaxError(0, "entry " + std::to_string(i) + " repeats attribute '" + slot + "'");
            }
            if (schema && !schema->belief.find_slot(slot) && flagged.insert(slot).second) {
                warnings.push_back({Severity::kWarning, "attribute:" + slot,
                                    "attribute is not a declared slot of '" + domain + "'"});
            }
        }
        entries.push_back(std::move(entry));
    }
    return DbTable(domain, std::move(entries), std::move(warnings));
}

DbTable load_db_file(const std::string& path, const TaskSchema* schema) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open DB file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return load_db(ss.str(), schema);
}

DbState query(const DbTable& table, const BeliefState& b, const Canonicalizer& canon) {
    if (b.domain != table.domain()) {
        throw DomainMismatch("belief domain '" + b.domain + "' does not match table '" + table.domain() + "'");
    }
    std::vector<std::pair<std::string, std::string>> constraints;
    for (const auto& [slot, value] : b.pairs) {
        std::string v = canon.canonical(value);
        if (v != kDontCare) constraints.emplace_back(slot, std::move(v));
    }
    DbState out;
    for (const auto& entry : table.entries()) {
        bool ok = true;
        for (const auto& [slot, value] : constraints) {
            const std::string* attr = entry.get(slot);
            if (!attr || canon.canonical(*attr) != value) {
                ok = false;
                break;
            }
        }
        if (ok) out.entries.push_back(entry);
    }
    return out;
}

std::string summarize(const DbState& db, std::size_t k, const TaskSchema* schema) {
    const std::size_t n = db.count();
    if (n == 0) return "no matching entries";
    std::string out = std::to_string(n) + (n == 1 ? " matching entry" : " matching entries");
    for (std::size_t i = 0; i < std::min(k, n); ++i) {
        const DbEntry& e = db.entries[i];
        std::vector<std::string> parts;
        std::set<std::string> done;
        if (schema) {
            for (const auto& slot : schema->belief.slots) {
                if (const std::string* v = e.get(slot.name)) {
                    parts.push_back(slot.name + " = " + *v);
                    done.insert(slot.name);
                }
            }
        }
        for (const auto& [key, value] : e.attributes) {
            if (!done.count(key)) parts.push_back(key + " = " + value);
        }
        out += "\n" + std::to_string(i + 1) + ". " + text::join(parts, "; ");
    }
    return out;
}

}  // namespace schemabot
