// SPDX-License-Identifier: Apache-2.0
#include <reactod/errors.hpp>
#include <reactod/text.hpp>
#include <reactod/tools.hpp>

#include <fmt/format.h>

#include <algorithm>

using json = nlohmann::json;

namespace reactod
{

std::string_view tool_name(ToolId tool)
{
    switch (tool)
    {
        case ToolId::IntentClassify: return kIntentClassifyName;
        case ToolId::SlotResolve: return kSlotResolveName;
        case ToolId::HistoryRetrieve: return kHistoryRetrieveName;
    }
    return {};
}

std::optional<ToolId> tool_from_name(std::string_view name)
{
    if (name == kIntentClassifyName)
        return ToolId::IntentClassify;
    if (name == kSlotResolveName)
        return ToolId::SlotResolve;
    if (name == kHistoryRetrieveName)
        return ToolId::HistoryRetrieve;
    return std::nullopt;
}

std::vector<std::string> tool_names()
{
    return { std::string(kIntentClassifyName), std::string(kSlotResolveName), std::string(kHistoryRetrieveName) };
}

ToolCall ToolCall::make(std::string name, json arguments, int step_index)
{
    auto call = ToolCall {};
    call.tool = tool_from_name(name);
    call.name = std::move(name);
    call.arguments = std::move(arguments);
    call.step_index = step_index;
    return call;
}

std::string ToolCall::canonical() const
{
    return name + " " + arguments.dump();
}

// {{{ rendering

std::string render_slot_type(SlotType const& type)
{
    switch (type.kind)
    {
        case SlotKind::Categorical: return "categorical: " + text::join(type.values, ", ");
        case SlotKind::Time: return "time: HH:MM, 24-hour";
        case SlotKind::Date: return "date: YYYY-MM-DD";
        case SlotKind::Number: return "number: non-negative integer";
        case SlotKind::Freeform: return "freeform text";
    }
    return "freeform text";
}

std::string render_slot_defs(IntentDef const& intent)
{
    if (intent.slots.empty())
        return "(no slots)";
    auto lines = std::vector<std::string> {};
    for (auto const& slot: intent.slots)
        lines.push_back(fmt::format("- {}: {} [{}] ({})",
                                    slot.id,
                                    slot.description.empty() ? "no description" : slot.description,
                                    render_slot_type(slot.type),
                                    to_string(slot.role)));
    return text::join(lines, "\n");
}

std::string render_observation(ToolResult const& result)
{
    struct Visitor
    {
        std::string operator()(IntentAccepted const& r) const
        {
            return fmt::format("intent {} accepted. Slot definitions for {}:\n{}\n"
                               "Next: call slot_resolve with the slots mentioned in this turn "
                               "(an empty list if there are none).",
                               r.intent_id,
                               r.intent_id,
                               r.slot_defs_rendered);
        }
        std::string operator()(SlotCandidates const& r) const
        {
            auto out = fmt::format("state update accepted: {} slot(s).", r.extractions.size());
            for (auto const& w: r.warnings)
                out += "\nwarning: " + w;
            return out;
        }
        std::string operator()(History const& r) const { return "Previous turns of the conversation:\n" + r.turns_rendered; }
        std::string operator()(ShortCircuit const& r) const
        {
            return fmt::format("intent {} is non-transactional; turn closed without slot resolution.", r.intent_id);
        }
    };
    return std::visit(Visitor {}, result);
}

// }}}
// {{{ executors

std::vector<SlotExtraction> parse_extractions(json const& arguments)
{
    if (!arguments.is_object())
        throw InvalidArgument("slot_resolve arguments must be an object");
    auto const it = arguments.find("extractions");
    if (it == arguments.end() || !it->is_array())
        throw InvalidArgument("slot_resolve requires an 'extractions' array");

    auto out = std::vector<SlotExtraction> {};
    for (auto const& item: *it)
    {
        if (!item.is_object())
            throw InvalidArgument("each extraction must be an object with slot, raw and norm");
        auto const field = [&](char const* key) {
            auto const f = item.find(key);
            if (f == item.end())
                throw InvalidArgument(fmt::format("extraction is missing '{}'", key));
            if (f->is_string())
                return f->get<std::string>();
            if (f->is_number_integer())
                return std::to_string(f->get<long long>());
            throw InvalidArgument(fmt::format("extraction field '{}' must be a string", key));
        };
        out.push_back(SlotExtraction { .slot_id = field("slot"), .raw = field("raw"), .norm = field("norm") });
    }
    return out;
}

ToolResult execute_intent_classify(json const& arguments, Schema const& schema)
{
    auto const it = arguments.is_object() ? arguments.find("intent") : arguments.end();
    if (!arguments.is_object() || it == arguments.end() || !it->is_string())
        throw InternalFault("intent_classify executed without a validated 'intent' argument");

    auto const* intent = schema.find_intent(it->get<std::string>());
    if (!intent)
        throw InternalFault(fmt::format("intent_classify executed with unknown intent '{}'", it->get<std::string>()));

    if (!intent->transactional)
        return ShortCircuit { intent->id };
    return IntentAccepted { .intent_id = intent->id, .slot_defs_rendered = render_slot_defs(*intent) };
}

ToolResult execute_slot_resolve(json const& arguments, std::string_view /*active_intent*/, Schema const& /*schema*/)
{
    auto candidates = SlotCandidates { .extractions = parse_extractions(arguments), .warnings = {} };
    auto seen = std::vector<std::string> {};
    for (auto const& e: candidates.extractions)
    {
        if (std::ranges::find(seen, e.slot_id) != seen.end())
            candidates.warnings.push_back(fmt::format("slot {} proposed more than once; the last value wins", e.slot_id));
        else
            seen.push_back(e.slot_id);
    }
    return candidates;
}

ToolResult execute_history_retrieve(json const& arguments, TurnLog const& dialogue)
{
    auto const it = arguments.is_object() ? arguments.find("n") : arguments.end();
    if (!arguments.is_object() || it == arguments.end() || !it->is_number_integer())
        throw InvalidArgument("history_retrieve requires an integer argument 'n'");
    auto const n = it->get<long long>();
    if (n < 1)
        throw InvalidArgument(fmt::format("history_retrieve requires n >= 1, got {}", n));

    auto const count = std::min<std::size_t>(static_cast<std::size_t>(n), dialogue.size());
    if (count == 0)
        return History { "(no previous turns)" };

    auto out = std::string {};
    for (auto i = dialogue.size() - count; i < dialogue.size(); ++i)
    {
        if (!out.empty())
            out += '\n';
        out += "user: " + dialogue[i].user + "\nsystem: " + dialogue[i].system;
    }
    return History { std::move(out) };
}

StateUpdate candidates_to_update(SlotCandidates const& candidates, Schema const& schema, int turn)
{
    auto update = StateUpdate {};
    for (auto const& e: candidates.extractions)
    {
        auto norm = std::string(text::trim(e.norm));
        if (auto const* slot = schema.find_slot(e.slot_id); slot && slot->type.kind == SlotKind::Categorical)
        {
            auto const key = text::normalize_key(norm);
            auto const match = std::ranges::find_if(slot->type.values,
                                                    [&](auto const& v) { return text::normalize_key(v) == key; });
            if (match != slot->type.values.end())
                norm = *match;
        }
        update.changes.insert_or_assign(e.slot_id, SlotValue { .raw = e.raw, .norm = std::move(norm), .source_turn = turn });
    }
    return update;
}

// }}}

} // namespace reactod
