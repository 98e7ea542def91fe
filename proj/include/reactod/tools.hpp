// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <reactod/belief_state.hpp>
#include <reactod/schema.hpp>

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace reactod
{

/// Closed tool library.
enum class ToolId
{
    IntentClassify,
    SlotResolve,
    HistoryRetrieve,
};

inline constexpr std::string_view kIntentClassifyName = "intent_classify";
inline constexpr std::string_view kSlotResolveName = "slot_resolve";
inline constexpr std::string_view kHistoryRetrieveName = "history_retrieve";

std::string_view tool_name(ToolId tool);
std::optional<ToolId> tool_from_name(std::string_view name);
std::vector<std::string> tool_names();

/// A proposed agent action. `tool` is empty when `name` is not in the library.
struct ToolCall
{
    std::string name;
    std::optional<ToolId> tool;
    nlohmann::json arguments = nlohmann::json::object();
    int step_index = 0;

    static ToolCall make(std::string name, nlohmann::json arguments, int step_index = 0);

    /// Tool name plus canonical (key-sorted, compact) argument text.
    [[nodiscard]] std::string canonical() const;
};

struct SlotExtraction
{
    std::string slot_id;
    std::string raw;
    std::string norm;

    bool operator==(SlotExtraction const&) const = default;
};

struct IntentAccepted
{
    std::string intent_id;
    std::string slot_defs_rendered;
};

struct SlotCandidates
{
    std::vector<SlotExtraction> extractions;
    std::vector<std::string> warnings; // duplicate proposals, last one wins
};

struct History
{
    std::string turns_rendered;
};

struct ShortCircuit
{
    std::string intent_id;
};

using ToolResult = std::variant<IntentAccepted, SlotCandidates, History, ShortCircuit>;

/// One exchanged user/system pair, kept verbatim for history retrieval.
struct DialogueTurn
{
    std::string user;
    std::string system;
};

using TurnLog = std::vector<DialogueTurn>;

/// Plain-text rendering of an intent's slot definitions, one line per slot:
/// "- <id>: <description> [<type and constraints>] (<role>)".
std::string render_slot_defs(IntentDef const& intent);
std::string render_slot_type(SlotType const& type);

/// Reads the `extractions` argument. Throws InvalidArgument on a shape error.
std::vector<SlotExtraction> parse_extractions(nlohmann::json const& arguments);

ToolResult execute_intent_classify(nlohmann::json const& arguments, Schema const& schema);
ToolResult execute_slot_resolve(nlohmann::json const& arguments, std::string_view active_intent, Schema const& schema);
ToolResult execute_history_retrieve(nlohmann::json const& arguments, TurnLog const& dialogue);

/// Turns SR candidates into a state delta; categorical values take the
/// schema's spelling, later proposals for a slot replace earlier ones.
StateUpdate candidates_to_update(SlotCandidates const& candidates, Schema const& schema, int turn);

/// Text fed back to the agent after a successful call.
std::string render_observation(ToolResult const& result);

} // namespace reactod
