// SPDX-License-Identifier: Apache-2.0
#include <reactod/errors.hpp>
#include <reactod/text.hpp>
#include <reactod/trace.hpp>

#include <fmt/format.h>

#include <fstream>
#include <sstream>

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace reactod
{

GoldStateMap gold_slots(GoldTurn const& turn, Schema const& schema)
{
    auto out = GoldStateMap {};
    for (auto const& [slot, value]: turn.gold_state.entries)
    {
        auto gold = GoldSlot { .value = value.norm, .alternatives = {}, .categorical = false };
        if (auto const* def = schema.find_slot(slot))
            gold.categorical = def->type.kind == SlotKind::Categorical;
        if (auto const alt = turn.alternatives.find(slot); alt != turn.alternatives.end())
            for (auto const& a: alt->second)
                if (a != gold.value)
                    gold.alternatives.push_back(a);
        out.emplace(slot, std::move(gold));
    }
    return out;
}

TurnRecord make_turn_record(TurnOutcome const& outcome, GoldTurn const& gold, Schema const& schema, EngineMode mode)
{
    auto record = TurnRecord {};
    record.dialogue_id = gold.dialogue_id;
    record.turn = gold.turn;
    record.mode = std::string(to_string(mode));
    record.llm_calls = outcome.llm_calls;
    record.output_tokens = outcome.output_tokens;
    record.degraded = outcome.degraded;
    record.committed = outcome.committed;
    record.intent = outcome.intent;
    record.delta = outcome.delta.changes;
    record.state = outcome.new_state.entries;
    record.error = outcome.trace.error;

    auto index = 0;
    for (auto const& step: outcome.trace.steps)
    {
        auto s = StepRecord {};
        s.thought = step.thought;
        if (step.call)
        {
            s.tool = step.call->name;
            s.args = step.call->arguments;
        }
        for (auto const& v: step.outcome.violations())
            s.validation.push_back(ViolationRecord {
                .category = std::string(to_string(v.category)),
                .code = std::string(to_string(v.code)),
                .subject = v.subject,
                .message = v.message,
                .step = index,
            });
        s.observation = step.observation;
        s.parse_error = step.parse_error;
        s.feedback = step.feedback;
        s.output_tokens = step.output_tokens;
        s.executed = step.result.has_value();
        record.steps.push_back(std::move(s));
        ++index;
    }

    record.gold = gold_slots(gold, schema);
    record.active_domains = gold.active_domains;
    record.service = gold.service;
    return record;
}

std::vector<TurnRecord> make_turn_records(DialogueResult const& result,
                                          std::vector<GoldTurn> const& gold,
                                          Schema const& schema,
                                          EngineMode mode)
{
    if (result.turns.size() != gold.size())
        throw AlignmentError(fmt::format("dialogue {}: {} outcomes for {} gold turns", result.dialogue_id, result.turns.size(), gold.size()));
    auto out = std::vector<TurnRecord> {};
    out.reserve(gold.size());
    for (auto i = std::size_t { 0 }; i < gold.size(); ++i)
        out.push_back(make_turn_record(result.turns[i], gold[i], schema, mode));
    return out;
}

// {{{ json

namespace
{
    ordered_json slot_map_to_json(std::map<std::string, SlotValue> const& m)
    {
        auto out = ordered_json::object();
        for (auto const& [slot, v]: m)
            out[slot] = ordered_json { { "raw", v.raw }, { "norm", v.norm } };
        return out;
    }

    template <typename T>
    T field(json const& j, char const* key)
    {
        auto const it = j.find(key);
        if (it == j.end())
            throw ParseError(fmt::format("missing field '{}'", key));
        try
        {
            return it->get<T>();
        }
        catch (json::exception const&)
        {
            throw ParseError(fmt::format("field '{}' has the wrong type", key));
        }
    }

    std::map<std::string, SlotValue> slot_map_from_json(json const& j, char const* key, int turn)
    {
        auto const it = j.find(key);
        if (it == j.end() || !it->is_object())
            throw ParseError(fmt::format("field '{}' must be an object", key));
        auto out = std::map<std::string, SlotValue> {};
        for (auto const& [slot, v]: it->items())
        {
            if (!v.is_object())
                throw ParseError(fmt::format("'{}.{}' must be an object", key, slot));
            out.emplace(slot, SlotValue { .raw = field<std::string>(v, "raw"), .norm = field<std::string>(v, "norm"), .source_turn = turn });
        }
        return out;
    }
} // namespace

ordered_json turn_record_to_json(TurnRecord const& r)
{
    auto steps = ordered_json::array();
    for (auto const& s: r.steps)
    {
        auto validation = ordered_json::array();
        for (auto const& v: s.validation)
            validation.push_back(ordered_json {
                { "category", v.category }, { "code", v.code }, { "subject", v.subject }, { "message", v.message }, { "step", v.step } });
        auto js = ordered_json {
            { "thought", s.thought },
            { "tool", s.tool },
            { "args", s.args },
            { "validation", std::move(validation) },
            { "observation", s.observation },
            { "executed", s.executed },
            { "output_tokens", s.output_tokens },
        };
        if (s.parse_error)
            js["parse_error"] = *s.parse_error;
        if (!s.feedback.empty())
            js["feedback"] = s.feedback;
        steps.push_back(std::move(js));
    }

    auto gold = ordered_json::object();
    for (auto const& [slot, g]: r.gold)
    {
        auto jg = ordered_json { { "value", g.value }, { "categorical", g.categorical } };
        if (!g.alternatives.empty())
            jg["alternatives"] = g.alternatives;
        gold[slot] = std::move(jg);
    }

    auto out = ordered_json {
        { "dialogue_id", r.dialogue_id },
        { "turn", r.turn },
        { "mode", r.mode },
        { "llm_calls", r.llm_calls },
        { "output_tokens", r.output_tokens },
        { "degraded", r.degraded },
        { "committed", r.committed },
        { "intent", r.intent },
        { "delta", slot_map_to_json(r.delta) },
        { "state", slot_map_to_json(r.state) },
        { "steps", std::move(steps) },
    };
    if (r.error)
        out["error"] = *r.error;
    out["gold"] = std::move(gold);
    out["active_domains"] = r.active_domains;
    if (r.service)
        out["service"] = *r.service;
    return out;
}

TurnRecord turn_record_from_json(json const& j)
{
    if (!j.is_object())
        throw ParseError("trace record must be an object");
    auto r = TurnRecord {};
    r.dialogue_id = field<std::string>(j, "dialogue_id");
    r.turn = field<int>(j, "turn");
    r.mode = field<std::string>(j, "mode");
    r.llm_calls = field<int>(j, "llm_calls");
    r.output_tokens = field<int>(j, "output_tokens");
    r.degraded = field<bool>(j, "degraded");
    r.committed = j.value("committed", false);
    r.intent = field<std::string>(j, "intent");
    r.delta = slot_map_from_json(j, "delta", r.turn);
    r.state = slot_map_from_json(j, "state", r.turn);
    if (auto const it = j.find("error"); it != j.end() && it->is_string())
        r.error = it->get<std::string>();

    auto const steps = j.find("steps");
    if (steps == j.end() || !steps->is_array())
        throw ParseError("field 'steps' must be an array");
    for (auto const& js: *steps)
    {
        auto s = StepRecord {};
        s.thought = field<std::string>(js, "thought");
        s.tool = field<std::string>(js, "tool");
        s.args = js.value("args", json::object());
        s.observation = field<std::string>(js, "observation");
        s.executed = js.value("executed", false);
        s.output_tokens = js.value("output_tokens", 0);
        if (auto const it = js.find("parse_error"); it != js.end() && it->is_string())
            s.parse_error = it->get<std::string>();
        s.feedback = js.value("feedback", "");
        auto const validation = js.find("validation");
        if (validation == js.end() || !validation->is_array())
            throw ParseError("field 'validation' must be an array");
        for (auto const& jv: *validation)
        {
            auto v = ViolationRecord {
                .category = field<std::string>(jv, "category"),
                .code = field<std::string>(jv, "code"),
                .subject = field<std::string>(jv, "subject"),
                .message = field<std::string>(jv, "message"),
                .step = jv.value("step", 0),
            };
            if (!code_from_string(v.code) || !category_from_string(v.category))
                throw ParseError(fmt::format("unknown violation '{}/{}'", v.category, v.code));
            s.validation.push_back(std::move(v));
        }
        r.steps.push_back(std::move(s));
    }

    auto const gold = j.find("gold");
    if (gold == j.end() || !gold->is_object())
        throw ParseError("field 'gold' must be an object");
    for (auto const& [slot, jg]: gold->items())
        r.gold.emplace(slot,
                       GoldSlot { .value = field<std::string>(jg, "value"),
                                  .alternatives = jg.value("alternatives", std::vector<std::string> {}),
                                  .categorical = jg.value("categorical", false) });
    r.active_domains = field<std::vector<std::string>>(j, "active_domains");
    if (auto const it = j.find("service"); it != j.end() && it->is_string())
        r.service = it->get<std::string>();
    return r;
}

std::string serialize_turn_record(TurnRecord const& record)
{
    return turn_record_to_json(record).dump() + "\n";
}

std::vector<TurnRecord> parse_traces(std::string_view jsonl)
{
    auto out = std::vector<TurnRecord> {};
    auto stream = std::istringstream(std::string(jsonl));
    auto line = std::string {};
    auto lineNo = 0;
    while (std::getline(stream, line))
    {
        ++lineNo;
        if (text::trim(line).empty())
            continue;
        try
        {
            auto const j = json::parse(line);
            out.push_back(turn_record_from_json(j));
        }
        catch (json::parse_error const& e)
        {
            throw ParseError(fmt::format("traces line {}: {}", lineNo, e.what()));
        }
        catch (ParseError const& e)
        {
            throw ParseError(fmt::format("traces line {}: {}", lineNo, e.what()));
        }
    }
    return out;
}

std::vector<TurnRecord> load_traces_file(std::string const& path)
{
    auto in = std::ifstream(path);
    if (!in)
        throw ParseError(fmt::format("cannot open traces '{}'", path));
    auto buffer = std::stringstream {};
    buffer << in.rdbuf();
    return parse_traces(buffer.str());
}

// }}}

} // namespace reactod
