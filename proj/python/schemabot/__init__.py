# Copyright 2026 The schemabot Authors. All Rights Reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""Schema-guided task-oriented dialog engine."""

from ._core import (
    Engine,
    SchemabotError,
    Session,
    combined,
    corpus_bleu,
    extend_schema,
    next_action_scores,
    parse_belief_sql,
    parse_schema,
    prompt_hash,
    render_belief_sql,
    validate_schema,
)

__all__ = [
    "Engine",
    "SchemabotError",
    "Session",
    "combined",
    "corpus_bleu",
    "extend_schema",
    "next_action_scores",
    "parse_belief_sql",
    "parse_schema",
    "prompt_hash",
    "render_belief_sql",
    "validate_schema",
]
