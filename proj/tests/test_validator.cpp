// SPDX-License-Identifier: Apache-2.0
#include <reactod/errors.hpp>
#include <reactod/validator.hpp>

#include "simulated_agent.hpp"
#include "taxonomy.hpp"

#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>

using namespace reactod;
using namespace reactod::testing;
using json = nlohmann::json;

namespace
{
ToolCall sr(std::vector<SlotExtraction> const& extractions)
{
    auto list = json::array();
    for (auto const& e: extractions)
        list.push_back({ { "slot", e.slot_id }, { "raw", e.raw }, { "norm", e.norm } });
    return ToolCall::make("slot_resolve", { { "extractions", list } });
}

std::vector<ViolationCode> codes(ValidationOutcome const& outcome)
{
    auto out = std::vector<ViolationCode> {};
    for (auto const& v: outcome.violations())
        out.push_back(v.code);
    return out;
}
} // namespace

TEST_SUITE("validator")
{
    TEST_CASE("taxonomy cases")
    {
        auto const schema = multiwoz_schema();
        for (auto const& c: taxonomy_cases(schema))
        {
            CAPTURE(c.name);
            CHECK(check_case(c, schema) == "");
        }
    }

    TEST_CASE("well-formed calls pass")
    {
        auto const schema = multiwoz_schema();
        CHECK(validate(ToolCall::make("intent_classify", { { "intent", "taxi" } }), {}, schema).passed());
        CHECK(validate(ToolCall::make("history_retrieve", { { "n", 2 } }), {}, schema).passed());
        auto const taxi = trace_with_intent("taxi", schema);
        CHECK(validate(sr({ ex("taxi-arriveby", "half five", "17:30"), ex("taxi-destination", "the museum", "museum") }), taxi, schema).passed());
        CHECK(validate(sr({}), taxi, schema).passed());
        // dontcare and the removal sentinel are accepted for typed slots.
        CHECK(validate(sr({ ex("taxi-arriveby", "any time", "dontcare") }), taxi, schema).passed());
        CHECK(validate(sr({ ex("taxi-arriveby", "forget the time", "<none>") }), taxi, schema).passed());
        // Categorical comparison ignores case and surrounding space.
        CHECK(validate(sr({ ex("hotel-area", "North", " North") }), trace_with_intent("hotel", schema), schema).passed());
    }

    TEST_CASE("value formats")
    {
        CHECK(is_valid_time("00:00"));
        CHECK(is_valid_time("23:59"));
        CHECK_FALSE(is_valid_time("24:00"));
        CHECK_FALSE(is_valid_time("9:15"));
        CHECK_FALSE(is_valid_time("09:60"));
        CHECK_FALSE(is_valid_time("09:15 "));
        CHECK(is_valid_date("2019-03-01"));
        CHECK_FALSE(is_valid_date("01/03/2019"));
        CHECK(is_valid_number("12"));
        CHECK_FALSE(is_valid_number("-1"));
        CHECK_FALSE(is_valid_number("two"));
    }

    TEST_CASE("every violation of a call is reported, in check order")
    {
        auto const schema = multiwoz_schema();
        auto const call = sr({ ex("hotel-area", "Cambridge", "Cambridge"),
                               ex("hotel-postcode", "cb1", "cb1"),
                               ex("hotel-stars", "four", "four"),
                               ex("hotel-bookday", "", "friday"),
                               ex("hotel-name", "the hotel", "hotel") });
        auto const outcome = validate(call, trace_with_intent("hotel", schema), schema);
        CHECK(codes(outcome)
              == std::vector { ViolationCode::EnumViolation,
                               ViolationCode::UnknownSlot,
                               ViolationCode::FormatViolation,
                               ViolationCode::FormatViolation,
                               ViolationCode::GenericReference });

        auto in = std::ifstream(fixture_dir() + "/feedback/golden.txt");
        auto golden = std::stringstream {};
        golden << in.rdbuf();
        CHECK(render_feedback(outcome) == golden.str());
    }

    TEST_CASE("action and schema violations combine")
    {
        auto const schema = multiwoz_schema();
        // Before any intent: prerequisite missing; slots cannot be checked yet
        // but a generic reference can.
        auto const outcome = validate(sr({ ex("restaurant-name", "that restaurant", "restaurant") }), {}, schema);
        CHECK(codes(outcome) == std::vector { ViolationCode::MissingPrerequisiteIC, ViolationCode::GenericReference });
    }

    TEST_CASE("no tool call after a short-circuit")
    {
        auto const schema = multiwoz_schema();
        auto const closed = trace_with_intent(schema.fallback_intent_id, schema);
        auto const outcome = validate(ToolCall::make("intent_classify", { { "intent", "hotel" } }), closed, schema);
        CHECK(codes(outcome) == std::vector { ViolationCode::MissingPrerequisiteIC });
    }

    TEST_CASE("rejected calls do not count as duplicates")
    {
        auto const schema = multiwoz_schema();
        auto trace = trace_with_intent("taxi", schema);
        auto const bad = sr({ ex("taxi-arriveby", "soon", "soon") });
        auto step = TraceStep {};
        step.call = bad;
        step.outcome = validate(bad, trace, schema);
        trace.steps.push_back(step);
        CHECK(codes(validate(bad, trace, schema)) == std::vector { ViolationCode::FormatViolation });

        // An executed call repeated verbatim is a duplicate, whatever its key order.
        auto const good = ToolCall::make("history_retrieve", { { "n", 1 } });
        trace.steps.push_back(executed_step(good, schema));
        CHECK(codes(validate(good, trace, schema)) == std::vector { ViolationCode::DuplicateCall });
    }

    TEST_CASE("re-classifying to another intent mid-turn is allowed")
    {
        auto const schema = multiwoz_schema();
        auto const trace = trace_with_intent("taxi", schema);
        CHECK(validate(ToolCall::make("intent_classify", { { "intent", "train" } }), trace, schema).passed());
    }

    TEST_CASE("argument shape errors")
    {
        auto const schema = multiwoz_schema();
        auto const taxi = trace_with_intent("taxi", schema);
        CHECK(codes(validate(ToolCall::make("intent_classify", json::object()), {}, schema)) == std::vector { ViolationCode::FormatViolation });
        CHECK(codes(validate(ToolCall::make("intent_classify", { { "intent", 3 } }), {}, schema)) == std::vector { ViolationCode::FormatViolation });
        CHECK(codes(validate(ToolCall::make("history_retrieve", { { "n", 0 } }), {}, schema)) == std::vector { ViolationCode::FormatViolation });
        CHECK(codes(validate(ToolCall::make("slot_resolve", { { "extractions", "north" } }), taxi, schema))
              == std::vector { ViolationCode::FormatViolation });
        CHECK(codes(validate(ToolCall::make("slot_resolve", json::array()), taxi, schema)) == std::vector { ViolationCode::FormatViolation });
        CHECK(codes(validate(sr({ ex("taxi-arriveby", "at five", "") }), taxi, schema)) == std::vector { ViolationCode::FormatViolation });
    }

    TEST_CASE("feedback on a passing outcome is a fault")
    {
        CHECK_THROWS_AS(render_feedback(ValidationOutcome::pass()), InternalFault);
        CHECK_THROWS_AS(ValidationOutcome::fail({}), InternalFault);
    }

    TEST_CASE("code and category names round-trip")
    {
        for (auto const code: kAllCodes)
            CHECK(code_from_string(to_string(code)) == code);
        for (auto const category: kAllCategories)
            CHECK(category_from_string(to_string(category)) == category);
        CHECK_FALSE(code_from_string("Nope"));
    }

    TEST_CASE("validate is deterministic over 10000 randomized repeat calls")
    {
        auto const schema = multiwoz_schema();
        auto cases = taxonomy_cases(schema);
        cases.push_back({ "pass", ToolCall::make("intent_classify", { { "intent", "taxi" } }), {}, ViolationCode::UndefinedTool, "" });
        auto reference = std::vector<ValidationOutcome> {};
        for (auto const& c: cases)
            reference.push_back(validate(c.call, c.trace, schema));

        auto rng = std::mt19937(99);
        auto mismatches = 0;
        for (auto i = 0; i < 10000; ++i)
        {
            auto const k = rng() % cases.size();
            // Fresh copies each time so nothing can be cached by identity.
            auto const call = ToolCall::make(cases[k].call.name, json::parse(cases[k].call.arguments.dump()));
            auto const trace = cases[k].trace;
            if (!(validate(call, trace, schema) == reference[k]))
                ++mismatches;
        }
        CHECK(mismatches == 0);
    }
}
