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

#include <string>
#include <string_view>
#include <vector>

// Small string helpers shared by the parsers and prompt renderers.
namespace schemabot::text {

std::string to_lower(std::string_view s);
std::string_view trim(std::string_view s);

// Lowercase, trim, and collapse internal whitespace runs to one space.
std::string normalize(std::string_view s);

// Lowercased ASCII letters, digits and underscores, non-empty.
bool is_identifier(std::string_view s);

// Canonical identifier form: lowercased, spaces and dashes mapped to '_'.
std::string canonical_identifier(std::string_view s);

bool iequals(std::string_view a, std::string_view b);
bool istarts_with(std::string_view s, std::string_view prefix);

std::vector<std::string> split_lines(std::string_view s);
std::vector<std::string> split_whitespace(std::string_view s);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Placeholder tokens found in `s` (the text between '[' and ']'), in order.
// Throws MalformedPlaceholder on unbalanced or nested brackets or on a token
// that is not made of [A-Za-z0-9_].
std::vector<std::string> placeholders(std::string_view s);

}  // namespace schemabot::text
