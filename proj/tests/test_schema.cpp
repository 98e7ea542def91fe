// SPDX-License-Identifier: Apache-2.0
#include <reactod/errors.hpp>
#include <reactod/schema.hpp>
#include <reactod/text.hpp>

#include "simulated_agent.hpp"

#include <doctest.h>

#include <fstream>
#include <random>
#include <set>
#include <sstream>

using namespace reactod;

namespace
{
std::string read(std::string const& path)
{
    auto in = std::ifstream(path);
    auto buffer = std::stringstream {};
    buffer << in.rdbuf();
    return buffer.str();
}

constexpr auto kMinimal = R"({"name": "tiny", "fallback_intent": "fallback",
  "intents": [{"id": "fallback", "description": "chit-chat", "transactional": false, "slots": []}]})";

constexpr auto kHotelArea = R"({"name": "h", "fallback_intent": "fallback", "intents": [
  {"id": "hotel", "description": "", "transactional": true, "slots": [
    {"id": "hotel-area", "description": "area", "type": "categorical", "role": "filter",
     "values": ["centre", "east", "north", "south", "west"]}]},
  {"id": "fallback", "description": "", "transactional": false, "slots": []}]})";

std::string sgd_service(std::string_view intents)
{
    return std::string(R"({"service_name": "Events_1", "slots": [
      {"name": "city", "description": "city", "is_categorical": false, "possible_values": []},
      {"name": "date", "description": "date", "is_categorical": false, "possible_values": []},
      {"name": "venue", "description": "venue", "is_categorical": false, "possible_values": []},
      {"name": "price", "description": "price", "is_categorical": false, "possible_values": []},
      {"name": "event_name", "description": "event", "is_categorical": false, "possible_values": []},
      {"name": "time", "description": "start time", "is_categorical": false, "possible_values": []},
      {"name": "tickets", "description": "count", "is_categorical": true, "possible_values": ["1", "2", "2", "3"]}],
      "intents": )") + std::string(intents) + "}";
}
} // namespace

TEST_SUITE("schema")
{
    TEST_CASE("minimal document has a single fallback intent")
    {
        auto const schema = load_schema(kMinimal);
        CHECK(schema.intents.size() == 1);
        CHECK(schema.fallback_intent_id == "fallback");
        CHECK(slots_for_intent(schema, "fallback").empty());
    }

    TEST_CASE("categorical enum is exposed as declared")
    {
        auto const schema = load_schema(kHotelArea);
        auto const* slot = schema.find_slot("hotel-area");
        REQUIRE(slot != nullptr);
        CHECK(slot->type.kind == SlotKind::Categorical);
        CHECK(slot->type.values == std::vector<std::string> { "centre", "east", "north", "south", "west" });
    }

    TEST_CASE("invariant violations are rejected")
    {
        auto const duplicate = R"({"name": "x", "fallback_intent": "fallback", "intents": [
          {"id": "fallback", "transactional": false}, {"id": "fallback", "transactional": false}]})";
        CHECK_THROWS_AS(load_schema(duplicate), InvariantError);

        auto const emptyEnum = R"({"name": "x", "fallback_intent": "fallback", "intents": [
          {"id": "a", "transactional": true, "slots": [{"id": "a-b", "type": "categorical", "values": []}]},
          {"id": "fallback", "transactional": false}]})";
        CHECK_THROWS_AS(load_schema(emptyEnum), InvariantError);

        auto const dupEnum = R"({"name": "x", "fallback_intent": "fallback", "intents": [
          {"id": "a", "transactional": true, "slots": [{"id": "a-b", "type": "categorical", "values": ["x", "X "]}]},
          {"id": "fallback", "transactional": false}]})";
        CHECK_THROWS_AS(load_schema(dupEnum), InvariantError);

        auto const slotsOnFallback = R"({"name": "x", "fallback_intent": "fallback", "intents": [
          {"id": "fallback", "transactional": false, "slots": [{"id": "x-y", "type": "freeform"}]}]})";
        CHECK_THROWS_AS(load_schema(slotsOnFallback), InvariantError);

        auto const transactionalFallback = R"({"name": "x", "fallback_intent": "fallback", "intents": [
          {"id": "fallback", "transactional": true}]})";
        CHECK_THROWS_AS(load_schema(transactionalFallback), InvariantError);

        auto const upperSlot = R"({"name": "x", "fallback_intent": "fallback", "intents": [
          {"id": "a", "transactional": true, "slots": [{"id": "A-Area", "type": "freeform"}]},
          {"id": "fallback", "transactional": false}]})";
        CHECK_THROWS_AS(load_schema(upperSlot), InvariantError);

        auto const missingFallback = R"({"name": "x", "fallback_intent": "none", "intents": []})";
        CHECK_THROWS_AS(load_schema(missingFallback), InvariantError);
    }

    TEST_CASE("malformed documents raise ParseError")
    {
        CHECK_THROWS_AS(load_schema("{not json"), ParseError);
        CHECK_THROWS_AS(load_schema("[]"), ParseError);
        CHECK_THROWS_AS(load_schema(R"({"name": "x", "fallback_intent": "f"})"), ParseError);
        CHECK_THROWS_AS(load_schema(R"({"name": "x", "fallback_intent": "f", "intents": [{"id": "f"}]})"), ParseError);
        CHECK_THROWS_AS(load_schema(R"({"name": "x", "fallback_intent": "f", "intents": [
          {"id": "a", "transactional": true, "slots": [{"id": "a-b", "type": "colour"}]}]})"),
                        ParseError);
    }

    TEST_CASE("serialization round-trips")
    {
        for (auto const* doc: { kMinimal, kHotelArea })
        {
            auto const schema = load_schema(doc);
            CHECK(load_schema(serialize_schema(schema)) == schema);
        }
        auto const multiwoz = testing::multiwoz_schema();
        CHECK(load_schema(serialize_schema(multiwoz)) == multiwoz);
        CHECK(serialize_schema(load_schema(serialize_schema(multiwoz))) == serialize_schema(multiwoz));
    }

    TEST_CASE("randomly generated schemas round-trip")
    {
        auto rng = std::mt19937(7);
        auto const kinds = std::vector { SlotKind::Categorical, SlotKind::Time, SlotKind::Date, SlotKind::Number, SlotKind::Freeform };
        for (auto iteration = 0; iteration < 200; ++iteration)
        {
            auto schema = Schema { .name = "gen", .intents = {}, .fallback_intent_id = "fallback", .generic_terms = {} };
            auto const intents = 1 + rng() % 4;
            for (auto i = 0u; i < intents; ++i)
            {
                auto intent = IntentDef { .id = "d" + std::to_string(i), .description = "intent " + std::to_string(i), .transactional = true, .slots = {} };
                auto const slots = rng() % 5;
                for (auto s = 0u; s < slots; ++s)
                {
                    auto type = SlotType { kinds[rng() % kinds.size()], {} };
                    if (type.kind == SlotKind::Categorical)
                        for (auto v = 0u; v <= rng() % 4; ++v)
                            type.values.push_back("v" + std::to_string(v));
                    intent.slots.push_back(SlotDef { .id = intent.id + "-s" + std::to_string(s),
                                                     .description = "slot",
                                                     .type = type,
                                                     .role = rng() % 2 ? SlotRole::Required : SlotRole::Filter });
                }
                schema.intents.push_back(std::move(intent));
            }
            schema.intents.push_back(IntentDef { .id = "fallback", .description = "", .transactional = false, .slots = {} });
            if (rng() % 2)
                schema.generic_terms["d0-name"] = { "thing", "things" };
            check_invariants(schema);
            CHECK(load_schema(serialize_schema(schema)) == schema);
        }
    }

    TEST_CASE("MultiWOZ derivation merges intents per domain")
    {
        auto const raw = read(testing::data_dir() + "/multiwoz/schema_2.2_subset.json");
        auto const annotations = load_type_annotations(read(testing::data_dir() + "/multiwoz/slot_types.json"));
        auto const schema = derive_multiwoz_schema(raw, annotations);

        auto transactional = 0;
        for (auto const& intent: schema.intents)
            transactional += intent.transactional ? 1 : 0;
        CHECK(transactional == 5);
        CHECK(schema.intents.size() == 6);
        CHECK_FALSE(schema.find_intent("police"));

        auto const& train = slots_for_intent(schema, "train");
        auto ids = std::set<std::string> {};
        for (auto const& s: train)
            ids.insert(s.id);
        // Union of find_train and book_train.
        CHECK(ids == std::set<std::string> { "train-arriveby", "train-departure", "train-day", "train-bookpeople", "train-leaveat", "train-destination" });
        CHECK(schema.find_slot("train-leaveat")->type.kind == SlotKind::Time);
        CHECK(schema.find_slot("restaurant-food")->type.kind == SlotKind::Freeform);
        CHECK(schema.find_slot("hotel-name")->type.kind == SlotKind::Freeform);
        CHECK(schema.find_slot("hotel-stars")->type.kind == SlotKind::Number);
        CHECK_FALSE(schema.find_slot("train-trainid"));

        // The checked-in derived schema is the output of this derivation.
        CHECK(serialize_schema(schema) == read(testing::data_dir() + "/multiwoz/schema.json"));

        for (auto const& intent: schema.intents)
            for (auto const& slot: intent.slots)
                if (slot.type.kind == SlotKind::Categorical)
                {
                    auto lowered = std::set<std::string> {};
                    for (auto const& v: slot.type.values)
                        lowered.insert(text::to_lower(v));
                    CHECK(lowered.size() == slot.type.values.size());
                }
    }

    TEST_CASE("MultiWOZ derivation errors")
    {
        auto const raw = read(testing::data_dir() + "/multiwoz/schema_2.2_subset.json");
        auto annotations = load_type_annotations(read(testing::data_dir() + "/multiwoz/slot_types.json"));
        annotations.erase("taxi-leaveat");
        CHECK_THROWS_AS(derive_multiwoz_schema(raw, annotations), MissingAnnotation);
        CHECK_THROWS_AS(derive_multiwoz_schema("", annotations), ParseError);
        CHECK_THROWS_AS(derive_multiwoz_schema("[]", annotations), ParseError);
    }

    TEST_CASE("SGD derivation maps roles and drops result-only slots")
    {
        auto const raw = sgd_service(R"([
          {"name": "FindEvents", "is_transactional": false, "required_slots": ["city"], "optional_slots": {"date": "dontcare"},
           "result_slots": ["venue", "price", "event_name", "city", "date"]},
          {"name": "BuyTickets", "is_transactional": true, "required_slots": ["event_name", "tickets"], "optional_slots": {"time": "19:00"},
           "result_slots": ["venue", "price", "event_name"]}])");
        auto const schema = derive_sgd_schema(raw);
        REQUIRE(schema.find_intent("events_1-findevents"));
        REQUIRE(schema.find_intent("events_1-buytickets"));

        auto const& find = slots_for_intent(schema, "events_1-findevents");
        REQUIRE(find.size() == 3);
        CHECK(find[0].id == "events_1-city");
        CHECK(find[0].role == SlotRole::Required);
        CHECK(find[1].id == "events_1-date");
        CHECK(find[1].role == SlotRole::Filter);
        CHECK(find[1].type.kind == SlotKind::Date);
        // event_name is a result of the search that the booking intent takes as input.
        CHECK(find[2].id == "events_1-event_name");

        auto const& buy = slots_for_intent(schema, "events_1-buytickets");
        REQUIRE(buy.size() == 3);
        CHECK(buy[1].type.kind == SlotKind::Categorical);
        CHECK(buy[1].type.values == std::vector<std::string> { "1", "2", "3" });
        CHECK(buy[2].type.kind == SlotKind::Time);

        // Never exposed: venue and price appear only among results.
        for (auto const& intent: schema.intents)
            for (auto const& slot: intent.slots)
            {
                CHECK(slot.id != "events_1-venue");
                CHECK(slot.id != "events_1-price");
            }
        CHECK(schema.generic_terms.at("events_1-event_name") == std::vector<std::string> { "event", "events" });
    }

    TEST_CASE("SGD intent with required city, optional date and result-only venue and price")
    {
        auto const schema = derive_sgd_schema(sgd_service(R"([
          {"name": "Lookup", "is_transactional": true, "required_slots": ["city"], "optional_slots": {"date": "2019-03-01"},
           "result_slots": ["venue", "price"]}])"));
        auto const& slots = slots_for_intent(schema, "events_1-lookup");
        REQUIRE(slots.size() == 2);
        CHECK(slots[0].id == "events_1-city");
        CHECK(slots[0].role == SlotRole::Required);
        CHECK(slots[1].id == "events_1-date");
        CHECK(slots[1].role == SlotRole::Filter);
    }

    TEST_CASE("SGD service without intents yields only the fallback")
    {
        auto const schema = derive_sgd_schema(sgd_service("[]"));
        REQUIRE(schema.intents.size() == 1);
        CHECK(schema.intents[0].id == schema.fallback_intent_id);
        CHECK_THROWS_AS(derive_sgd_schema("12"), ParseError);
    }

    TEST_CASE("slots_for_intent")
    {
        auto const schema = testing::multiwoz_schema();
        CHECK(slots_for_intent(schema, schema.fallback_intent_id).empty());
        auto const& hotel = slots_for_intent(schema, "hotel");
        CHECK(std::ranges::any_of(hotel, [](auto const& s) { return s.id == "hotel-area"; }));
        CHECK_THROWS_AS(slots_for_intent(schema, "nonexistent"), UnknownIntent);
    }

    TEST_CASE("slot id helpers")
    {
        CHECK(slot_domain("taxi-arriveby") == "taxi");
        CHECK(slot_local_name("taxi-arriveby") == "arriveby");
        CHECK(slot_domain("restaurants_1-restaurant_name") == "restaurants_1");
        auto const schema = testing::multiwoz_schema();
        CHECK(schema.domains() == std::vector<std::string> { "attraction", "hotel", "restaurant", "taxi", "train" });
    }
}
