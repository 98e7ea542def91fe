// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace reactod
{

enum class SlotKind
{
    Categorical,
    Time,
    Date,
    Number,
    Freeform,
};

/// Value type of a slot. Only Categorical carries a value list.
struct SlotType
{
    SlotKind kind = SlotKind::Freeform;
    std::vector<std::string> values;

    static SlotType categorical(std::vector<std::string> values) { return { SlotKind::Categorical, std::move(values) }; }
    static SlotType time() { return { SlotKind::Time, {} }; }
    static SlotType date() { return { SlotKind::Date, {} }; }
    static SlotType number() { return { SlotKind::Number, {} }; }
    static SlotType freeform() { return { SlotKind::Freeform, {} }; }

    bool operator==(SlotType const&) const = default;
};

enum class SlotRole
{
    Required,
    Filter,
};

struct SlotDef
{
    std::string id; // "domain-slotname"
    std::string description;
    SlotType type;
    SlotRole role = SlotRole::Filter;

    bool operator==(SlotDef const&) const = default;
};

struct IntentDef
{
    std::string id;
    std::string description;
    bool transactional = true;
    std::vector<SlotDef> slots;

    bool operator==(IntentDef const&) const = default;
};

/// Domain ontology. Immutable once built by load_schema / derive_*.
struct Schema
{
    std::string name;
    std::vector<IntentDef> intents;
    std::string fallback_intent_id;
    std::map<std::string, std::vector<std::string>> generic_terms;

    [[nodiscard]] IntentDef const* find_intent(std::string_view id) const;

    /// First definition of slot_id across all intents, or nullptr.
    [[nodiscard]] SlotDef const* find_slot(std::string_view slot_id) const;

    /// Ordered, duplicate-free list of slot id prefixes.
    [[nodiscard]] std::vector<std::string> domains() const;

    [[nodiscard]] std::vector<std::string> intent_ids() const;

    bool operator==(Schema const&) const = default;
};

/// Domain part of a canonical slot id ("hotel-area" -> "hotel").
std::string_view slot_domain(std::string_view slot_id);
/// Name part of a canonical slot id ("hotel-area" -> "area").
std::string_view slot_local_name(std::string_view slot_id);

std::string_view to_string(SlotKind kind);
std::string_view to_string(SlotRole role);

/// Checks every structural invariant; throws InvariantError on the first one broken.
void check_invariants(Schema const& schema);

Schema load_schema(std::string_view document);
Schema load_schema_file(std::string const& path);
nlohmann::json schema_to_json(Schema const& schema);
std::string serialize_schema(Schema const& schema);

/// Slot type map used when deriving the MultiWOZ schema, read from
/// {"slot-id": {"type": "...", "values": [...]}} or {"slot-id": "time"}.
std::map<std::string, SlotType> load_type_annotations(std::string_view document);

inline std::vector<std::string> const kMultiwozDomains { "attraction", "hotel", "restaurant", "taxi", "train" };

/// Merges every MultiWOZ 2.2 service in `domains` into one intent each.
Schema derive_multiwoz_schema(std::string_view raw,
                              std::map<std::string, SlotType> const& type_annotations,
                              std::vector<std::string> const& domains = kMultiwozDomains);

/// Builds one intent per SGD service intent. Accepts a single service
/// object or an array of them.
Schema derive_sgd_schema(std::string_view raw);

/// Slot list of intent_id in declaration order. Throws UnknownIntent.
std::vector<SlotDef> const& slots_for_intent(Schema const& schema, std::string_view intent_id);

/// Default generic references for a freeform name slot, or nothing for other slots.
std::optional<std::vector<std::string>> default_generic_terms(SlotDef const& slot);

} // namespace reactod
