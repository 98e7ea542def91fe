// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <reactod/tools.hpp>
#include <reactod/validator.hpp>

#include <optional>
#include <string>
#include <vector>

namespace reactod
{

/// One reasoning iteration: the backend's proposal and what happened to it.
struct TraceStep
{
    std::string thought;
    std::optional<ToolCall> call;           // empty when the output did not parse
    std::optional<std::string> parse_error; // set when the output did not parse
    ValidationOutcome outcome;
    std::optional<ToolResult> result; // set only when the call was executed
    std::string observation;          // text returned to the agent
    std::string feedback;             // validator / parser feedback injected, if any
    int output_tokens = 0;
    bool tokens_estimated = false;
};

/// H_{<k} for the current turn.
struct AgentTrace
{
    std::vector<TraceStep> steps;
    std::optional<std::string> error; // backend failure that ended the turn

    /// Intent of the most recent accepted intent_classify, if any.
    [[nodiscard]] std::optional<std::string> active_intent() const;
    [[nodiscard]] bool short_circuited() const;
};

} // namespace reactod
