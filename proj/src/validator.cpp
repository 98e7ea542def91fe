// SPDX-License-Identifier: Apache-2.0
#include <reactod/agent_trace.hpp>
#include <reactod/errors.hpp>
#include <reactod/text.hpp>
#include <reactod/validator.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <regex>

using json = nlohmann::json;

namespace reactod
{

// {{{ enum names

std::string_view to_string(ViolationCategory category)
{
    switch (category)
    {
        case ViolationCategory::ActionCompliance: return "ActionCompliance";
        case ViolationCategory::SchemaConformance: return "SchemaConformance";
        case ViolationCategory::CoreferenceConsistency: return "CoreferenceConsistency";
    }
    return {};
}

std::string_view to_string(ViolationCode code)
{
    switch (code)
    {
        case ViolationCode::UndefinedTool: return "UndefinedTool";
        case ViolationCode::MissingPrerequisiteIC: return "MissingPrerequisiteIC";
        case ViolationCode::DuplicateCall: return "DuplicateCall";
        case ViolationCode::UnknownIntent: return "UnknownIntent";
        case ViolationCode::UnknownSlot: return "UnknownSlot";
        case ViolationCode::EnumViolation: return "EnumViolation";
        case ViolationCode::FormatViolation: return "FormatViolation";
        case ViolationCode::GenericReference: return "GenericReference";
    }
    return {};
}

std::optional<ViolationCategory> category_from_string(std::string_view s)
{
    for (auto const c: kAllCategories)
        if (to_string(c) == s)
            return c;
    return std::nullopt;
}

std::optional<ViolationCode> code_from_string(std::string_view s)
{
    for (auto const c: kAllCodes)
        if (to_string(c) == s)
            return c;
    return std::nullopt;
}

ViolationCategory category_of(ViolationCode code)
{
    switch (code)
    {
        case ViolationCode::UndefinedTool:
        case ViolationCode::MissingPrerequisiteIC:
        case ViolationCode::DuplicateCall: return ViolationCategory::ActionCompliance;
        case ViolationCode::UnknownIntent:
        case ViolationCode::UnknownSlot:
        case ViolationCode::EnumViolation:
        case ViolationCode::FormatViolation: return ViolationCategory::SchemaConformance;
        case ViolationCode::GenericReference: return ViolationCategory::CoreferenceConsistency;
    }
    return ViolationCategory::ActionCompliance;
}

// }}}

ValidationOutcome ValidationOutcome::fail(std::vector<Violation> violations)
{
    if (violations.empty())
        throw InternalFault("a failing validation outcome needs at least one violation");
    auto outcome = ValidationOutcome {};
    outcome._violations = std::move(violations);
    return outcome;
}

std::optional<std::string> AgentTrace::active_intent() const
{
    for (auto it = steps.rbegin(); it != steps.rend(); ++it)
        if (it->result)
            if (auto const* accepted = std::get_if<IntentAccepted>(&*it->result))
                return accepted->intent_id;
    return std::nullopt;
}

bool AgentTrace::short_circuited() const
{
    return std::ranges::any_of(steps, [](auto const& s) { return s.result && std::holds_alternative<ShortCircuit>(*s.result); });
}

// {{{ value formats

bool is_valid_time(std::string_view value)
{
    static auto const pattern = std::regex(R"(^([01][0-9]|2[0-3]):[0-5][0-9]$)");
    return std::regex_match(value.begin(), value.end(), pattern);
}

bool is_valid_date(std::string_view value)
{
    static auto const pattern = std::regex(R"(^\d{4}-\d{2}-\d{2}$)");
    return std::regex_match(value.begin(), value.end(), pattern);
}

bool is_valid_number(std::string_view value)
{
    static auto const pattern = std::regex(R"(^\d+$)");
    return std::regex_match(value.begin(), value.end(), pattern);
}

// }}}

namespace
{
    Violation make(ViolationCode code, std::string subject, std::string message)
    {
        return Violation { .category = category_of(code), .code = code, .message = std::move(message), .subject = std::move(subject) };
    }

    std::vector<std::string> slot_ids(IntentDef const& intent)
    {
        auto out = std::vector<std::string> {};
        for (auto const& s: intent.slots)
            out.push_back(s.id);
        return out;
    }

    std::optional<Violation> check_value(SlotDef const& slot, SlotExtraction const& e)
    {
        auto const norm = text::trim(e.norm);
        if (norm == kNullSentinel)
            return std::nullopt;
        if (text::trim(e.raw).empty())
            return make(ViolationCode::FormatViolation,
                        slot.id,
                        fmt::format("empty surface form for slot {}: copy the words used in the dialogue into raw", slot.id));
        if (norm.empty())
            return make(ViolationCode::FormatViolation,
                        slot.id,
                        fmt::format("empty value for slot {}: provide a normalized value, or {} to remove the slot",
                                    slot.id,
                                    kNullSentinel));
        if (text::to_lower(norm) == kDontCare)
            return std::nullopt;

        switch (slot.type.kind)
        {
            case SlotKind::Categorical: {
                auto const key = text::to_lower(norm);
                auto const known = std::ranges::any_of(slot.type.values, [&](auto const& v) { return text::normalize_key(v) == key; });
                if (!known)
                    return make(ViolationCode::EnumViolation,
                                slot.id,
                                fmt::format("invalid value {} for slot {}: expected one of {}",
                                            norm,
                                            slot.id,
                                            text::join(slot.type.values, ", ")));
                break;
            }
            case SlotKind::Time:
                if (!is_valid_time(norm))
                    return make(ViolationCode::FormatViolation, slot.id, fmt::format("invalid format for slot {}: expected HH:MM", slot.id));
                break;
            case SlotKind::Date:
                if (!is_valid_date(norm))
                    return make(ViolationCode::FormatViolation,
                                slot.id,
                                fmt::format("invalid format for slot {}: expected YYYY-MM-DD", slot.id));
                break;
            case SlotKind::Number:
                if (!is_valid_number(norm))
                    return make(ViolationCode::FormatViolation,
                                slot.id,
                                fmt::format("invalid format for slot {}: expected a non-negative integer", slot.id));
                break;
            case SlotKind::Freeform: break;
        }
        return std::nullopt;
    }

    std::string argument_hint(ToolId tool)
    {
        switch (tool)
        {
            case ToolId::IntentClassify: return R"({"intent": "<intent id>"})";
            case ToolId::SlotResolve: return R"({"extractions": [{"slot": "<slot id>", "raw": "<surface form>", "norm": "<normalized value>"}]})";
            case ToolId::HistoryRetrieve: return R"({"n": <integer >= 1>})";
        }
        return {};
    }

    Violation bad_arguments(ToolCall const& call)
    {
        return make(ViolationCode::FormatViolation,
                    call.name,
                    fmt::format("invalid arguments for {}: expected {}", call.name, argument_hint(*call.tool)));
    }
} // namespace

std::vector<Violation> check_schema_conformance(std::vector<SlotExtraction> const& extractions,
                                                std::string_view intent_id,
                                                Schema const& schema)
{
    auto out = std::vector<Violation> {};
    auto const* intent = schema.find_intent(intent_id);
    if (!intent)
    {
        out.push_back(make(ViolationCode::UnknownIntent,
                           std::string(intent_id),
                           fmt::format("unknown intent {}: valid intents are {}", intent_id, text::join(schema.intent_ids(), ", "))));
        return out;
    }

    for (auto const& e: extractions)
    {
        auto const slot = std::ranges::find_if(intent->slots, [&](auto const& s) { return s.id == e.slot_id; });
        if (slot == intent->slots.end())
        {
            auto const valid = intent->slots.empty() ? std::string("none") : text::join(slot_ids(*intent), ", ");
            out.push_back(make(ViolationCode::UnknownSlot,
                               e.slot_id,
                               fmt::format("unknown slot {} for intent {}: valid slots are {}", e.slot_id, intent->id, valid)));
            continue;
        }
        if (auto v = check_value(*slot, e))
            out.push_back(std::move(*v));
    }
    return out;
}

std::vector<Violation> check_coreference(std::vector<SlotExtraction> const& extractions, Schema const& schema)
{
    auto out = std::vector<Violation> {};
    for (auto const& e: extractions)
    {
        auto const terms = schema.generic_terms.find(e.slot_id);
        if (terms == schema.generic_terms.end())
            continue;
        auto const key = text::normalize_key(e.norm);
        if (std::ranges::any_of(terms->second, [&](auto const& t) { return text::normalize_key(t) == key; }))
            out.push_back(make(ViolationCode::GenericReference,
                               e.slot_id,
                               fmt::format("generic reference {} for slot {}: resolve the specific entity name, "
                                           "call history_retrieve to find it in earlier turns",
                                           text::trim(e.norm),
                                           e.slot_id)));
    }
    return out;
}

ValidationOutcome validate(ToolCall const& call, AgentTrace const& turn_trace, Schema const& schema)
{
    auto violations = std::vector<Violation> {};

    // Action compliance.
    if (!call.tool)
    {
        violations.push_back(make(ViolationCode::UndefinedTool,
                                  call.name,
                                  fmt::format("undefined tool {}: available tools are {}", call.name, text::join(tool_names(), ", "))));
        return ValidationOutcome::fail(std::move(violations));
    }

    auto const activeIntent = turn_trace.active_intent();
    if (turn_trace.short_circuited())
        violations.push_back(make(ViolationCode::MissingPrerequisiteIC,
                                  call.name,
                                  fmt::format("{} called after the turn was closed by a non-transactional intent: "
                                              "no further tool calls are allowed",
                                              call.name)));
    else if (*call.tool == ToolId::SlotResolve && !activeIntent)
        violations.push_back(make(ViolationCode::MissingPrerequisiteIC,
                                  call.name,
                                  "slot_resolve called before intent_classify: call intent_classify first to select the intent"));

    // Only executed calls count; resubmitting a rejected call is a retry.
    auto const canonical = call.canonical();
    auto const duplicate = std::ranges::any_of(turn_trace.steps, [&](auto const& s) { return s.call && s.result && s.call->canonical() == canonical; });
    if (duplicate)
        violations.push_back(make(ViolationCode::DuplicateCall,
                                  call.name,
                                  fmt::format("duplicate call to {} with identical arguments in this turn: "
                                              "change the arguments or call a different tool",
                                              call.name)));

    // Schema conformance and coreference consistency.
    switch (*call.tool)
    {
        case ToolId::IntentClassify: {
            auto const it = call.arguments.is_object() ? call.arguments.find("intent") : call.arguments.end();
            if (!call.arguments.is_object() || it == call.arguments.end() || !it->is_string())
                violations.push_back(bad_arguments(call));
            else if (auto const intent = it->get<std::string>(); !schema.find_intent(intent))
                violations.push_back(make(ViolationCode::UnknownIntent,
                                          intent,
                                          fmt::format("unknown intent {}: valid intents are {}", intent, text::join(schema.intent_ids(), ", "))));
            break;
        }
        case ToolId::HistoryRetrieve: {
            auto const it = call.arguments.is_object() ? call.arguments.find("n") : call.arguments.end();
            if (!call.arguments.is_object() || it == call.arguments.end() || !it->is_number_integer() || it->get<long long>() < 1)
                violations.push_back(bad_arguments(call));
            break;
        }
        case ToolId::SlotResolve: {
            auto extractions = std::vector<SlotExtraction> {};
            try
            {
                extractions = parse_extractions(call.arguments);
            }
            catch (InvalidArgument const&)
            {
                violations.push_back(bad_arguments(call));
                break;
            }
            if (activeIntent)
                for (auto& v: check_schema_conformance(extractions, *activeIntent, schema))
                    violations.push_back(std::move(v));
            for (auto& v: check_coreference(extractions, schema))
                violations.push_back(std::move(v));
            break;
        }
    }

    if (violations.empty())
        return ValidationOutcome::pass();
    return ValidationOutcome::fail(std::move(violations));
}

std::string render_feedback(ValidationOutcome const& outcome)
{
    if (outcome.passed())
        throw InternalFault("render_feedback called on a passing outcome");
    auto lines = std::vector<std::string> {};
    for (auto const& v: outcome.violations())
        lines.push_back(v.message);
    return text::join(lines, "\n");
}

} // namespace reactod
