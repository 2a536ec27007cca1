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

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace schemabot {

// Base of every error the engine raises. `code()` is a stable machine token
// (e.g. "unknown_slot") shared with the HTTP API error bodies.
class Error : public std::runtime_error {
  public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

  private:
    std::string code_;
};

class SyntaxError : public Error {
  public:
    SyntaxError(std::size_t position, const std::string& message)
        : Error("syntax_error", "at byte " + std::to_string(position) + ": " + message),
          position_(position) {}

    std::size_t position() const noexcept { return position_; }

  private:
    std::size_t position_;
};

enum class Severity { kError, kWarning };

struct Diagnostic {
    Severity severity = Severity::kError;
    std::string element;  // offending element id, e.g. "slot:food" or "turn:t3"
    std::string message;

    bool is_error() const { return severity == Severity::kError; }
    bool operator==(const Diagnostic&) const = default;
};

std::string to_string(const Diagnostic& d);

class ValidationError : public Error {
  public:
    explicit ValidationError(std::vector<Diagnostic> diagnostics);

    const std::vector<Diagnostic>& diagnostics() const noexcept { return diagnostics_; }

  private:
    std::vector<Diagnostic> diagnostics_;
};

#define SCHEMABOT_DEFINE_ERROR(Name, token)                                   \
    class Name : public Error {                                               \
      public:                                                                 \
        explicit Name(const std::string& message) : Error(token, message) {} \
    }

SCHEMABOT_DEFINE_ERROR(UnknownTurnId, "unknown_turn_id");
SCHEMABOT_DEFINE_ERROR(EmptySchemaSet, "empty_schema_set");
SCHEMABOT_DEFINE_ERROR(ParseFailure, "parse_failure");
SCHEMABOT_DEFINE_ERROR(UnknownDomain, "unknown_domain");
SCHEMABOT_DEFINE_ERROR(InvalidValue, "invalid_value");
SCHEMABOT_DEFINE_ERROR(DomainMismatch, "domain_mismatch");
SCHEMABOT_DEFINE_ERROR(MissingAction, "missing_action");
SCHEMABOT_DEFINE_ERROR(MalformedPlaceholder, "malformed_placeholder");
SCHEMABOT_DEFINE_ERROR(SessionClosed, "session_closed");
SCHEMABOT_DEFINE_ERROR(Misalignment, "misalignment");
SCHEMABOT_DEFINE_ERROR(LengthMismatch, "length_mismatch");
SCHEMABOT_DEFINE_ERROR(EmptyInput, "empty");
SCHEMABOT_DEFINE_ERROR(OutOfRange, "out_of_range");
SCHEMABOT_DEFINE_ERROR(ConfigError, "config_error");
SCHEMABOT_DEFINE_ERROR(BindFailure, "bind_failure");
SCHEMABOT_DEFINE_ERROR(InvalidArgument, "invalid_argument");

#undef SCHEMABOT_DEFINE_ERROR

class UnknownSlot : public Error {
  public:
    UnknownSlot(std::string domain, std::string slot)
        : Error("unknown_slot", "slot '" + slot + "' is not declared for domain '" + domain + "'"),
          domain_(std::move(domain)),
          slot_(std::move(slot)) {}

    const std::string& domain() const noexcept { return domain_; }
    const std::string& slot() const noexcept { return slot_; }

  private:
    std::string domain_;
    std::string slot_;
};

// Errors raised by LLM backends. All share the "backend" family so the
// pipeline can propagate them uniformly after its retry budget.
class BackendError : public Error {
  public:
    BackendError(std::string code, const std::string& message, bool transient)
        : Error(std::move(code), message), transient_(transient) {}

    bool transient() const noexcept { return transient_; }

  private:
    bool transient_;
};

class Timeout : public BackendError {
  public:
    explicit Timeout(const std::string& message) : BackendError("timeout", message, true) {}
};

class RateLimited : public BackendError {
  public:
    explicit RateLimited(const std::string& message) : BackendError("rate_limited", message, true) {}
};

class AuthFailure : public BackendError {
  public:
    explicit AuthFailure(const std::string& message) : BackendError("auth_failure", message, false) {}
};

class ProviderError : public BackendError {
  public:
    ProviderError(int status, const std::string& message, bool transient = false)
        : BackendError("provider_error", message, transient), status_(status) {}

    int status() const noexcept { return status_; }

  private:
    int status_;
};

}  // namespace schemabot
