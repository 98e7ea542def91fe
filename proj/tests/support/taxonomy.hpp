// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <reactod/agent_trace.hpp>
#include <reactod/schema.hpp>
#include <reactod/validator.hpp>

#include <string>
#include <vector>

namespace reactod::testing
{

/// A crafted call with the in-turn history it is validated against.
struct TaxonomyCase
{
    std::string name;
    ToolCall call;
    AgentTrace trace;
    ViolationCode expected;
    std::string expected_message; // checked verbatim when not empty
};

/// A trace step for `call` that was validated and executed.
TraceStep executed_step(ToolCall const& call, Schema const& schema);

/// Trace whose only step is an accepted intent_classify for `intent`.
AgentTrace trace_with_intent(std::string const& intent, Schema const& schema);

/// One case per violation type of the validator taxonomy.
std::vector<TaxonomyCase> taxonomy_cases(Schema const& schema);

/// Empty when the case yields exactly its expected violation, else a description.
std::string check_case(TaxonomyCase const& c, Schema const& schema);

} // namespace reactod::testing
