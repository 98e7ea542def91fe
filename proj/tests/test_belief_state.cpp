// SPDX-License-Identifier: Apache-2.0
#include <reactod/belief_state.hpp>
#include <reactod/errors.hpp>

#include "oracles.hpp"
#include "simulated_agent.hpp"

#include <doctest.h>

using namespace reactod;

namespace
{
SlotValue sv(std::string norm, std::string raw = {})
{
    if (raw.empty())
        raw = norm;
    return SlotValue { .raw = std::move(raw), .norm = std::move(norm), .source_turn = 0 };
}

StateUpdate upd(std::initializer_list<std::pair<std::string const, SlotValue>> changes)
{
    return StateUpdate { .changes = changes };
}
} // namespace

TEST_SUITE("belief_state")
{
    TEST_CASE("inserts and overwrites")
    {
        auto s = apply_update({}, upd({ { "hotel-area", sv("north") } }), 1);
        CHECK(s.size() == 1);
        CHECK(s.turn_index == 1);
        s = apply_update(s, upd({ { "hotel-area", sv("south") }, { "taxi-leaveat", sv("09:15") } }), 2);
        CHECK(*s.norm("hotel-area") == "south");
        CHECK(*s.norm("taxi-leaveat") == "09:15");
    }

    TEST_CASE("sentinel removes the slot")
    {
        auto s = apply_update({}, upd({ { "hotel-area", sv("north") }, { "hotel-name", sv("acorn") } }), 1);
        s = apply_update(s, upd({ { "hotel-area", sv(std::string(kNullSentinel)) } }), 2);
        CHECK_FALSE(s.contains("hotel-area"));
        CHECK(s.contains("hotel-name"));
        // Removing a slot that is not there is harmless.
        auto const again = apply_update(s, upd({ { "hotel-area", sv(std::string(kNullSentinel)) } }), 3);
        CHECK(again == s);
    }

    TEST_CASE("empty delta is a no-op")
    {
        auto const s = apply_update({}, upd({ { "train-day", sv("friday") } }), 1);
        CHECK(apply_update(s, {}, 2) == s);
    }

    TEST_CASE("other domains survive an update")
    {
        auto s = apply_update({}, upd({ { "hotel-area", sv("north") }, { "train-day", sv("friday") } }), 1);
        s = apply_update(s, upd({ { "taxi-leaveat", sv("10:00") } }), 2);
        CHECK(*s.norm("hotel-area") == "north");
        CHECK(*s.norm("train-day") == "friday");
    }

    TEST_CASE("equality ignores provenance")
    {
        auto a = sv("north");
        auto b = sv("north");
        b.source_turn = 7;
        CHECK(a == b);
        CHECK_FALSE(sv("north", "up north") == sv("north", "the north"));
    }

    TEST_CASE("gold_delta reconstructs the target")
    {
        auto prev = BeliefState {};
        prev.entries = { { "hotel-area", sv("north") }, { "hotel-name", sv("acorn") }, { "taxi-leaveat", sv("09:15") } };
        auto curr = BeliefState {};
        curr.entries = { { "hotel-area", sv("south") }, { "taxi-leaveat", sv("09:15") }, { "train-day", sv("monday") } };
        auto const delta = gold_delta(prev, curr);
        CHECK(delta.changes.size() == 3);
        CHECK(delta.changes.at("hotel-name").is_null());
        CHECK_FALSE(delta.changes.contains("taxi-leaveat"));
        CHECK(same_norms(apply_update(prev, delta, 1), curr));
    }

    TEST_CASE("projection")
    {
        auto s = BeliefState {};
        s.entries = { { "hotel-area", sv("north") }, { "hotel-name", sv("acorn") }, { "taxi-leaveat", sv("09:15") } };
        CHECK(project_domain(s, "hotel").size() == 2);
        CHECK(project_domain(s, "train").empty());
        auto const schema = testing::multiwoz_schema();
        CHECK(project_domain(s, "taxi", schema).size() == 1);
        CHECK_THROWS_AS(project_domain(s, "police", schema), UnknownDomain);
    }

    TEST_CASE("1000 random update sequences keep the protocol")
    {
        auto const failure = testing::state_protocol_violation(1000, 4242u);
        INFO(failure.value_or(""));
        CHECK_FALSE(failure.has_value());
    }
}
