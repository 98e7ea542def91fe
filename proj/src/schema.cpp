// SPDX-License-Identifier: Apache-2.0
#include <reactod/errors.hpp>
#include <reactod/schema.hpp>
#include <reactod/text.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace reactod
{

namespace
{
    constexpr auto kFallbackId = "fallback";
    constexpr auto kFallbackDescription =
        "Non-transactional turns: greetings, thanks, acknowledgements, goodbyes and out-of-domain requests.";

    bool is_lowercase_id(std::string_view id)
    {
        return std::ranges::none_of(id, [](unsigned char c) { return std::isupper(c) != 0; });
    }

    std::vector<std::string> dedup_ci(std::vector<std::string> const& values)
    {
        auto seen = std::set<std::string> {};
        auto out = std::vector<std::string> {};
        for (auto const& v: values)
            if (seen.insert(text::normalize_key(v)).second)
                out.push_back(v);
        return out;
    }

    SlotKind parse_kind(std::string_view s)
    {
        auto const lower = text::to_lower(s);
        if (lower == "categorical")
            return SlotKind::Categorical;
        if (lower == "time")
            return SlotKind::Time;
        if (lower == "date")
            return SlotKind::Date;
        if (lower == "number")
            return SlotKind::Number;
        if (lower == "freeform")
            return SlotKind::Freeform;
        throw ParseError(fmt::format("unknown slot type '{}'", s));
    }

    SlotRole parse_role(std::string_view s)
    {
        auto const lower = text::to_lower(s);
        if (lower == "required")
            return SlotRole::Required;
        if (lower == "filter")
            return SlotRole::Filter;
        throw ParseError(fmt::format("unknown slot role '{}'", s));
    }

    template <typename J>
    J parse_json(std::string_view document, std::string_view what)
    {
        if (text::trim(document).empty())
            throw ParseError(fmt::format("{}: empty document", what));
        try
        {
            return J::parse(document);
        }
        catch (json::parse_error const& e)
        {
            throw ParseError(fmt::format("{}: {}", what, e.what()));
        }
    }

    template <typename J>
    std::string get_string(J const& obj, char const* key, std::string_view context)
    {
        auto const it = obj.find(key);
        if (it == obj.end() || !it->is_string())
            throw ParseError(fmt::format("{}: missing string field '{}'", context, key));
        return it->template get<std::string>();
    }

    template <typename J>
    std::vector<std::string> get_string_list(J const& obj, char const* key)
    {
        auto out = std::vector<std::string> {};
        auto const it = obj.find(key);
        if (it == obj.end() || it->is_null())
            return out;
        if (!it->is_array())
            throw ParseError(fmt::format("field '{}' must be an array", key));
        for (auto const& v: *it)
        {
            if (!v.is_string())
                throw ParseError(fmt::format("field '{}' must contain strings", key));
            out.push_back(v.template get<std::string>());
        }
        return out;
    }

    IntentDef fallback_intent()
    {
        return IntentDef { .id = kFallbackId, .description = kFallbackDescription, .transactional = false, .slots = {} };
    }

    void add_default_generic_terms(Schema& schema)
    {
        for (auto const& intent: schema.intents)
            for (auto const& slot: intent.slots)
                if (auto terms = default_generic_terms(slot); terms && !schema.generic_terms.contains(slot.id))
                    schema.generic_terms.emplace(slot.id, std::move(*terms));
    }

    std::string strip_service_index(std::string_view service)
    {
        // "restaurants_2" -> "restaurants"
        auto const pos = service.rfind('_');
        if (pos != std::string_view::npos && pos + 1 < service.size()
            && std::ranges::all_of(service.substr(pos + 1), [](unsigned char c) { return std::isdigit(c) != 0; }))
            return std::string(service.substr(0, pos));
        return std::string(service);
    }
} // namespace

// {{{ Schema accessors

IntentDef const* Schema::find_intent(std::string_view id) const
{
    auto const it = std::ranges::find_if(intents, [&](auto const& i) { return i.id == id; });
    return it == intents.end() ? nullptr : &*it;
}

SlotDef const* Schema::find_slot(std::string_view slot_id) const
{
    for (auto const& intent: intents)
        for (auto const& slot: intent.slots)
            if (slot.id == slot_id)
                return &slot;
    return nullptr;
}

std::vector<std::string> Schema::domains() const
{
    auto out = std::vector<std::string> {};
    for (auto const& intent: intents)
        for (auto const& slot: intent.slots)
        {
            auto domain = std::string(slot_domain(slot.id));
            if (std::ranges::find(out, domain) == out.end())
                out.push_back(std::move(domain));
        }
    return out;
}

std::vector<std::string> Schema::intent_ids() const
{
    auto out = std::vector<std::string> {};
    for (auto const& intent: intents)
        out.push_back(intent.id);
    return out;
}

std::string_view slot_domain(std::string_view slot_id)
{
    auto const pos = slot_id.find('-');
    return pos == std::string_view::npos ? slot_id : slot_id.substr(0, pos);
}

std::string_view slot_local_name(std::string_view slot_id)
{
    auto const pos = slot_id.find('-');
    return pos == std::string_view::npos ? slot_id : slot_id.substr(pos + 1);
}

std::string_view to_string(SlotKind kind)
{
    switch (kind)
    {
        case SlotKind::Categorical: return "categorical";
        case SlotKind::Time: return "time";
        case SlotKind::Date: return "date";
        case SlotKind::Number: return "number";
        case SlotKind::Freeform: return "freeform";
    }
    return "freeform";
}

std::string_view to_string(SlotRole role)
{
    return role == SlotRole::Required ? "required" : "filter";
}

// }}}
// {{{ invariants

void check_invariants(Schema const& schema)
{
    auto intentIds = std::set<std::string> {};
    for (auto const& intent: schema.intents)
    {
        if (intent.id.empty())
            throw InvariantError("intent id must not be empty");
        if (!intentIds.insert(intent.id).second)
            throw InvariantError(fmt::format("duplicate intent id '{}'", intent.id));
        if (!intent.transactional && !intent.slots.empty())
            throw InvariantError(fmt::format("non-transactional intent '{}' must not declare slots", intent.id));

        auto slotIds = std::set<std::string> {};
        for (auto const& slot: intent.slots)
        {
            if (slot.id.empty())
                throw InvariantError(fmt::format("intent '{}' declares a slot with an empty id", intent.id));
            if (!is_lowercase_id(slot.id))
                throw InvariantError(fmt::format("slot id '{}' must be lowercase", slot.id));
            auto const dash = slot.id.find('-');
            if (dash == std::string::npos || dash == 0 || dash + 1 == slot.id.size())
                throw InvariantError(fmt::format("slot id '{}' is not of the form domain-slotname", slot.id));
            if (!slotIds.insert(slot.id).second)
                throw InvariantError(fmt::format("duplicate slot id '{}' in intent '{}'", slot.id, intent.id));

            auto const& type = slot.type;
            if (type.kind == SlotKind::Categorical)
            {
                if (type.values.empty())
                    throw InvariantError(fmt::format("categorical slot '{}' has an empty value list", slot.id));
                if (dedup_ci(type.values).size() != type.values.size())
                    throw InvariantError(fmt::format("categorical slot '{}' has duplicate values", slot.id));
            }
            else if (!type.values.empty())
                throw InvariantError(fmt::format("non-categorical slot '{}' must not list values", slot.id));
        }
    }

    auto const* fallback = schema.find_intent(schema.fallback_intent_id);
    if (!fallback)
        throw InvariantError(fmt::format("fallback intent '{}' is not defined", schema.fallback_intent_id));
    if (fallback->transactional)
        throw InvariantError(fmt::format("fallback intent '{}' must be non-transactional", fallback->id));
}

// }}}
// {{{ schema file format

Schema load_schema(std::string_view document)
{
    auto const doc = parse_json<ordered_json>(document, "schema");
    if (!doc.is_object())
        throw ParseError("schema: top-level value must be an object");

    auto schema = Schema {};
    schema.name = get_string(doc, "name", "schema");
    schema.fallback_intent_id = get_string(doc, "fallback_intent", "schema");

    auto const intents = doc.find("intents");
    if (intents == doc.end() || !intents->is_array())
        throw ParseError("schema: missing array field 'intents'");

    for (auto const& jIntent: *intents)
    {
        if (!jIntent.is_object())
            throw ParseError("schema: intent entries must be objects");
        auto intent = IntentDef {};
        intent.id = get_string(jIntent, "id", "intent");
        intent.description = jIntent.value("description", "");
        auto const transactional = jIntent.find("transactional");
        if (transactional == jIntent.end() || !transactional->is_boolean())
            throw ParseError(fmt::format("intent '{}': missing boolean field 'transactional'", intent.id));
        intent.transactional = transactional->get<bool>();

        if (auto const slots = jIntent.find("slots"); slots != jIntent.end())
        {
            if (!slots->is_array())
                throw ParseError(fmt::format("intent '{}': 'slots' must be an array", intent.id));
            for (auto const& jSlot: *slots)
            {
                if (!jSlot.is_object())
                    throw ParseError(fmt::format("intent '{}': slot entries must be objects", intent.id));
                auto slot = SlotDef {};
                slot.id = get_string(jSlot, "id", "slot");
                slot.description = jSlot.value("description", "");
                slot.type.kind = parse_kind(get_string(jSlot, "type", slot.id));
                slot.type.values = get_string_list(jSlot, "values");
                slot.role = parse_role(jSlot.value("role", "filter"));
                intent.slots.push_back(std::move(slot));
            }
        }
        schema.intents.push_back(std::move(intent));
    }

    if (auto const terms = doc.find("generic_terms"); terms != doc.end())
    {
        if (!terms->is_object())
            throw ParseError("schema: 'generic_terms' must be an object");
        for (auto const& [slot, list]: terms->items())
        {
            auto values = std::vector<std::string> {};
            if (!list.is_array())
                throw ParseError(fmt::format("generic_terms['{}'] must be an array", slot));
            for (auto const& v: list)
            {
                if (!v.is_string())
                    throw ParseError(fmt::format("generic_terms['{}'] must contain strings", slot));
                values.push_back(v.get<std::string>());
            }
            schema.generic_terms.emplace(slot, std::move(values));
        }
    }

    check_invariants(schema);
    return schema;
}

Schema load_schema_file(std::string const& path)
{
    auto in = std::ifstream(path);
    if (!in)
        throw ParseError(fmt::format("cannot open schema file '{}'", path));
    auto buffer = std::stringstream {};
    buffer << in.rdbuf();
    return load_schema(buffer.str());
}

namespace
{
    ordered_json to_ordered_json(Schema const& schema)
    {
        auto doc = ordered_json::object();
        doc["name"] = schema.name;
        doc["fallback_intent"] = schema.fallback_intent_id;
        doc["intents"] = ordered_json::array();
        for (auto const& intent: schema.intents)
        {
            auto jIntent = ordered_json::object();
            jIntent["id"] = intent.id;
            jIntent["description"] = intent.description;
            jIntent["transactional"] = intent.transactional;
            jIntent["slots"] = ordered_json::array();
            for (auto const& slot: intent.slots)
            {
                auto jSlot = ordered_json::object();
                jSlot["id"] = slot.id;
                jSlot["description"] = slot.description;
                jSlot["type"] = std::string(to_string(slot.type.kind));
                jSlot["role"] = std::string(to_string(slot.role));
                if (slot.type.kind == SlotKind::Categorical)
                    jSlot["values"] = slot.type.values;
                jIntent["slots"].push_back(std::move(jSlot));
            }
            doc["intents"].push_back(std::move(jIntent));
        }
        doc["generic_terms"] = ordered_json::object();
        for (auto const& [slot, terms]: schema.generic_terms)
            doc["generic_terms"][slot] = terms;
        return doc;
    }
} // namespace

nlohmann::json schema_to_json(Schema const& schema)
{
    return json::parse(to_ordered_json(schema).dump());
}

std::string serialize_schema(Schema const& schema)
{
    return to_ordered_json(schema).dump(2) + "\n";
}

std::map<std::string, SlotType> load_type_annotations(std::string_view document)
{
    auto const doc = parse_json<json>(document, "type annotations");
    if (!doc.is_object())
        throw ParseError("type annotations: top-level value must be an object");
    auto out = std::map<std::string, SlotType> {};
    for (auto const& [slot, entry]: doc.items())
    {
        auto type = SlotType {};
        if (entry.is_string())
            type.kind = parse_kind(entry.get<std::string>());
        else if (entry.is_object())
        {
            type.kind = parse_kind(get_string(entry, "type", slot));
            type.values = get_string_list(entry, "values");
        }
        else
            throw ParseError(fmt::format("type annotation for '{}' must be a string or object", slot));
        out.emplace(slot, std::move(type));
    }
    return out;
}

// }}}
// {{{ derivation

Schema derive_multiwoz_schema(std::string_view raw,
                              std::map<std::string, SlotType> const& type_annotations,
                              std::vector<std::string> const& domains)
{
    auto const doc = parse_json<ordered_json>(raw, "multiwoz schema");
    if (!doc.is_array())
        throw ParseError("multiwoz schema: top-level value must be an array of services");

    auto schema = Schema { .name = "multiwoz", .intents = {}, .fallback_intent_id = kFallbackId, .generic_terms = {} };

    for (auto const& domain: domains)
    {
        auto const service = std::ranges::find_if(doc, [&](auto const& s) {
            return s.is_object() && s.contains("service_name") && s["service_name"] == domain;
        });
        if (service == doc.end())
            throw ParseError(fmt::format("multiwoz schema: domain '{}' not found", domain));

        // Collect informable slots across all intents of the domain.
        auto required = std::set<std::string> {};
        auto informable = std::set<std::string> {};
        for (auto const& intent: service->value("intents", ordered_json::array()))
        {
            for (auto const& s: get_string_list(intent, "required_slots"))
            {
                required.insert(s);
                informable.insert(s);
            }
            if (auto const opt = intent.find("optional_slots"); opt != intent.end() && opt->is_object())
                for (auto const& [s, _]: opt->items())
                    informable.insert(s);
        }

        auto merged = IntentDef {};
        merged.id = domain;
        merged.description = service->value("description", "");
        merged.transactional = true;
        for (auto const& jSlot: service->value("slots", ordered_json::array()))
        {
            auto const name = get_string(jSlot, "name", domain);
            if (!informable.contains(name))
                continue;
            auto const annotation = type_annotations.find(name);
            if (annotation == type_annotations.end())
                throw MissingAnnotation(fmt::format("no type annotation for slot '{}'", name));
            auto type = annotation->second;
            if (type.kind == SlotKind::Categorical)
                type.values = dedup_ci(type.values.empty() ? get_string_list(jSlot, "possible_values") : type.values);
            merged.slots.push_back(SlotDef {
                .id = text::to_lower(name),
                .description = jSlot.value("description", ""),
                .type = std::move(type),
                .role = required.contains(name) ? SlotRole::Required : SlotRole::Filter,
            });
        }
        schema.intents.push_back(std::move(merged));
    }

    schema.intents.push_back(fallback_intent());
    add_default_generic_terms(schema);
    check_invariants(schema);
    return schema;
}

Schema derive_sgd_schema(std::string_view raw)
{
    auto doc = parse_json<ordered_json>(raw, "sgd schema");
    auto name = std::string("sgd");
    if (doc.is_object())
    {
        name = text::to_lower(get_string(doc, "service_name", "sgd schema"));
        doc = ordered_json::array({ doc });
    }
    if (!doc.is_array())
        throw ParseError("sgd schema: expected a service object or an array of services");

    auto schema = Schema { .name = name, .intents = {}, .fallback_intent_id = kFallbackId, .generic_terms = {} };

    for (auto const& service: doc)
    {
        if (!service.is_object())
            throw ParseError("sgd schema: service entries must be objects");
        auto const serviceName = text::to_lower(get_string(service, "service_name", "sgd service"));

        auto slotInfo = std::map<std::string, ordered_json> {};
        for (auto const& jSlot: service.value("slots", ordered_json::array()))
            slotInfo.emplace(get_string(jSlot, "name", serviceName), jSlot);

        auto const intents = service.value("intents", ordered_json::array());

        // Slots any intent of this service can take from the user.
        auto informable = std::set<std::string> {};
        for (auto const& intent: intents)
        {
            for (auto const& s: get_string_list(intent, "required_slots"))
                informable.insert(s);
            if (auto const opt = intent.find("optional_slots"); opt != intent.end() && opt->is_object())
                for (auto const& [s, _]: opt->items())
                    informable.insert(s);
        }

        auto const makeSlot = [&](std::string const& local, SlotRole role) {
            auto const info = slotInfo.find(local);
            auto const lowerLocal = text::to_lower(local);
            auto slot = SlotDef { .id = serviceName + "-" + lowerLocal, .description = {}, .type = {}, .role = role };
            auto possible = std::vector<std::string> {};
            auto categorical = false;
            if (info != slotInfo.end())
            {
                slot.description = info->second.value("description", "");
                categorical = info->second.value("is_categorical", false);
                possible = get_string_list(info->second, "possible_values");
            }
            if (categorical && !possible.empty())
                slot.type = SlotType::categorical(dedup_ci(possible));
            else if (lowerLocal.find("date") != std::string::npos)
                slot.type = SlotType::date();
            else if (lowerLocal.find("time") != std::string::npos)
                slot.type = SlotType::time();
            else
                slot.type = SlotType::freeform();
            return slot;
        };

        for (auto const& jIntent: intents)
        {
            auto intent = IntentDef {};
            auto const intentName = get_string(jIntent, "name", serviceName);
            intent.id = serviceName + "-" + text::to_lower(intentName);
            intent.description = jIntent.value("description", "");
            intent.transactional = true;

            auto seen = std::set<std::string> {};
            for (auto const& s: get_string_list(jIntent, "required_slots"))
                if (seen.insert(s).second)
                    intent.slots.push_back(makeSlot(s, SlotRole::Required));
            if (auto const opt = jIntent.find("optional_slots"); opt != jIntent.end() && opt->is_object())
                for (auto const& [s, _]: opt->items())
                    if (seen.insert(s).second)
                        intent.slots.push_back(makeSlot(s, SlotRole::Filter));

            // Search intents also carry result slots that other intents of
            // the service accept as input (e.g. the name a booking needs).
            if (!jIntent.value("is_transactional", false))
                for (auto const& s: get_string_list(jIntent, "result_slots"))
                    if (informable.contains(s) && seen.insert(s).second)
                        intent.slots.push_back(makeSlot(s, SlotRole::Filter));

            schema.intents.push_back(std::move(intent));
        }
    }

    schema.intents.push_back(fallback_intent());
    add_default_generic_terms(schema);
    check_invariants(schema);
    return schema;
}

// }}}

std::vector<SlotDef> const& slots_for_intent(Schema const& schema, std::string_view intent_id)
{
    auto const* intent = schema.find_intent(intent_id);
    if (!intent)
        throw UnknownIntent(fmt::format("unknown intent '{}'", intent_id));
    return intent->slots;
}

std::optional<std::vector<std::string>> default_generic_terms(SlotDef const& slot)
{
    if (slot.type.kind != SlotKind::Freeform)
        return std::nullopt;

    auto const local = slot_local_name(slot.id);
    auto noun = std::string {};
    if (local == "name")
        noun = strip_service_index(slot_domain(slot.id));
    else if (local.size() > 5 && local.ends_with("_name"))
        noun = std::string(local.substr(0, local.size() - 5));
    else
        return std::nullopt;

    auto singular = noun;
    if (singular.size() > 1 && singular.ends_with('s'))
        singular.pop_back();
    return std::vector<std::string> { singular, singular + "s" };
}

} // namespace reactod
