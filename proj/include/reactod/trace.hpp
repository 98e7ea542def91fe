// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <reactod/datasets.hpp>
#include <reactod/engine.hpp>
#include <reactod/schema.hpp>

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace reactod
{

/// Gold value of one slot as the metrics see it.
struct GoldSlot
{
    std::string value;
    std::vector<std::string> alternatives; // equivalent forms, any one matches
    bool categorical = false;

    bool operator==(GoldSlot const&) const = default;
};

using GoldStateMap = std::map<std::string, GoldSlot>;

/// Gold slots of a turn, typed against the schema (unknown slots count as non-categorical).
GoldStateMap gold_slots(GoldTurn const& turn, Schema const& schema);

struct ViolationRecord
{
    std::string category;
    std::string code;
    std::string subject;
    std::string message;
    int step = 0;

    bool operator==(ViolationRecord const&) const = default;
};

struct StepRecord
{
    std::string thought;
    std::string tool; // empty when the output did not parse
    nlohmann::json args = nlohmann::json::object();
    std::vector<ViolationRecord> validation;
    std::string observation;
    std::optional<std::string> parse_error;
    std::string feedback;
    int output_tokens = 0;
    bool executed = false;

    bool operator==(StepRecord const&) const = default;
};

/// One line of traces.jsonl. Carries the gold annotation so reports can be
/// recomputed from traces alone.
struct TurnRecord
{
    std::string dialogue_id;
    int turn = 0;
    std::string mode;
    int llm_calls = 0;
    int output_tokens = 0;
    bool degraded = false;
    bool committed = false;
    std::string intent;
    std::map<std::string, SlotValue> delta;
    std::map<std::string, SlotValue> state;
    std::vector<StepRecord> steps;
    std::optional<std::string> error;

    GoldStateMap gold;
    std::vector<std::string> active_domains;
    std::optional<std::string> service;

    bool operator==(TurnRecord const&) const = default;
};

TurnRecord make_turn_record(TurnOutcome const& outcome, GoldTurn const& gold, Schema const& schema, EngineMode mode);

/// All records of one dialogue run, in turn order.
std::vector<TurnRecord> make_turn_records(DialogueResult const& result,
                                          std::vector<GoldTurn> const& gold,
                                          Schema const& schema,
                                          EngineMode mode);

nlohmann::ordered_json turn_record_to_json(TurnRecord const& record);
/// Throws ParseError on a missing or mistyped field.
TurnRecord turn_record_from_json(nlohmann::json const& j);

/// One compact JSON line, newline-terminated.
std::string serialize_turn_record(TurnRecord const& record);

/// Reads traces.jsonl content. Throws ParseError naming the offending line.
std::vector<TurnRecord> parse_traces(std::string_view jsonl);
std::vector<TurnRecord> load_traces_file(std::string const& path);

} // namespace reactod
