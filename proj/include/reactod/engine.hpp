// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <reactod/agent_trace.hpp>
#include <reactod/backend.hpp>
#include <reactod/belief_state.hpp>
#include <reactod/datasets.hpp>
#include <reactod/schema.hpp>
#include <reactod/tools.hpp>

#include <chrono>
#include <optional>
#include <string>
#include <vector>

namespace reactod
{

enum class EngineMode
{
    FullLoop,        // bounded ReAct loop with validator feedback
    NoLoop,          // one intent call plus one slot call, no feedback
    LoopNoValidator, // loop active, calls executed unchecked
};

/// Prompting regime of the backbone.
enum class CallingStyle
{
    Text,   // Thought / Action / Action Input grammar
    Native, // structured tool calls
};

std::string_view to_string(EngineMode mode);
std::optional<EngineMode> mode_from_string(std::string_view s); // full | noloop | novalidator
std::string_view to_string(CallingStyle style);
std::optional<CallingStyle> style_from_string(std::string_view s);

struct EngineConfig
{
    int k_max = 6;
    double temperature = 0.0;
    EngineMode mode = EngineMode::FullLoop;
    CallingStyle style = CallingStyle::Text;
    int max_output_tokens = 1024;
    int transport_retries = 2;
    std::chrono::milliseconds retry_backoff { 500 }; // doubles per retry

    /// Throws InvalidArgument if k_max < 1.
    void check() const;
};

/// Everything a turn is conditioned on.
struct TurnContext
{
    std::string user_utterance;
    std::string prev_system_action;
    BeliefState prev_state;
    std::vector<std::string> prev_intents;
    TurnLog dialogue_log; // earlier turns, for history retrieval only
    int turn_index = 0;
};

struct TurnOutcome
{
    StateUpdate delta;
    BeliefState new_state;
    std::string intent;
    AgentTrace trace;
    bool degraded = false;
    bool committed = false; // a validated slot_resolve updated the state
    int llm_calls = 0;
    int output_tokens = 0;
};

/// Role instructions, tool protocol, intent list and tool signatures. Never
/// contains slot definitions or dialogue history.
std::string build_system_prompt(Schema const& schema, CallingStyle style = CallingStyle::Text);

/// Current belief state, previous system utterance, previous intents and
/// the current user utterance.
std::string build_turn_message(TurnContext const& ctx);

/// Function signatures of the three tools, chat-completions "tools" format.
nlohmann::json tool_signatures();

struct ParsedStep
{
    std::string thought;
    ToolCall call;
};

/// Reads one backend step. Native calls are mapped directly, text goes
/// through the Thought/Action/Action Input grammar. Throws ParseFailure.
ParsedStep parse_agent_step(CompletionResult const& raw);

/// Feedback returned to the agent when its output does not parse.
inline constexpr std::string_view kParseFailureFeedback =
    "could not parse action; follow the Thought/Action/Action Input format";

TurnOutcome run_turn(TurnContext const& ctx, Schema const& schema, CompletionBackend& backend, EngineConfig const& config);

struct DialogueResult
{
    std::string dialogue_id;
    std::vector<TurnOutcome> turns;
    std::vector<BeliefState> predicted; // full state after each turn
};

/// Threads the predicted state through all turns of a dialogue.
DialogueResult run_dialogue(std::vector<GoldTurn> const& dialogue,
                            Schema const& schema,
                            CompletionBackend& backend,
                            EngineConfig const& config);

} // namespace reactod
