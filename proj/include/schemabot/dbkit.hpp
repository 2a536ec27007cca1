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
#include <vector>

#include "schemabot/belief.hpp"
#include "schemabot/schema.hpp"

namespace schemabot {

struct DbEntry {
    std::string domain;
    // Attribute keys are canonical identifiers; values are kept as written.
    std::map<std::string, std::string> attributes;

    const std::string* get(std::string_view slot) const;
    bool operator==(const DbEntry&) const = default;
};

// Immutable after load.
class DbTable {
  public:
    DbTable() = default;
    DbTable(std::string domain, std::vector<DbEntry> entries, std::vector<Diagnostic> warnings = {});

    const std::string& domain() const { return domain_; }
    const std::vector<DbEntry>& entries() const { return entries_; }
    const std::vector<Diagnostic>& warnings() const { return warnings_; }

  private:
    std::string domain_;
    std::vector<DbEntry> entries_;
    std::vector<Diagnostic> warnings_;
};

struct DbState {
    std::vector<DbEntry> entries;

    std::size_t count() const { return entries.size(); }
    const DbEntry* top() const { return entries.empty() ? nullptr : &entries.front(); }
    bool operator==(const DbState&) const = default;
};

// Loads `{"domain": ..., "entries": [{...}]}`. When `schema` is given the
// domain must match it and attributes outside its slots become warnings.
DbTable load_db(std::string_view text, const TaskSchema* schema = nullptr);
DbTable load_db_file(const std::string& path, const TaskSchema* schema = nullptr);

// Exact match after canonicalization; "dontcare" imposes no constraint and
// entries lacking a constrained attribute never match. Order follows the file.
DbState query(const DbTable& table, const BeliefState& b, const Canonicalizer& canon = {});

// "<n> matching entries" plus up to k entries as "key = value" pairs. When a
// schema is given, attributes follow its slot order, remaining keys sorted.
std::string summarize(const DbState& db, std::size_t k, const TaskSchema* schema = nullptr);

}  // namespace schemabot
