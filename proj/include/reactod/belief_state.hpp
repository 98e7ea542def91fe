// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <reactod/schema.hpp>

#include <map>
#include <string>
#include <string_view>

namespace reactod
{

/// Value that removes a slot when it appears in an update.
inline constexpr std::string_view kNullSentinel = "<none>";

struct SlotValue
{
    std::string raw;  // surface form from the dialogue
    std::string norm; // canonical form, compared by the metrics
    int source_turn = 0;

    /// Provenance (source_turn) does not take part in equality.
    bool operator==(SlotValue const& other) const { return raw == other.raw && norm == other.norm; }

    [[nodiscard]] bool is_null() const { return norm == kNullSentinel; }
};

/// B_t: persistent multi-domain slot table. Snapshots are values; nothing
/// mutates one in place once it has been handed out.
struct BeliefState
{
    std::map<std::string, SlotValue> entries;
    int turn_index = 0;

    [[nodiscard]] bool empty() const { return entries.empty(); }
    [[nodiscard]] std::size_t size() const { return entries.size(); }
    [[nodiscard]] bool contains(std::string_view slot) const { return entries.contains(std::string(slot)); }
    [[nodiscard]] std::string const* norm(std::string_view slot) const;

    bool operator==(BeliefState const& other) const { return entries == other.entries; }
};

/// Delta for one turn. An empty delta is a no-op.
struct StateUpdate
{
    std::map<std::string, SlotValue> changes;

    [[nodiscard]] bool empty() const { return changes.empty(); }
    bool operator==(StateUpdate const&) const = default;
};

/// Upserts delta into prev: inserts, overwrites, removes on the null sentinel.
/// Keys absent from delta are carried over untouched.
BeliefState apply_update(BeliefState const& prev, StateUpdate const& delta, int turn);

/// Minimal delta D with apply_update(prev_gold, D) == curr_gold on norm values.
StateUpdate gold_delta(BeliefState const& prev_gold, BeliefState const& curr_gold);

/// Entries whose slot id prefix equals domain.
BeliefState project_domain(BeliefState const& state, std::string_view domain);
/// Same, but throws UnknownDomain when schema has no such domain.
BeliefState project_domain(BeliefState const& state, std::string_view domain, Schema const& schema);

/// True when both states hold the same keys with identical norm values.
bool same_norms(BeliefState const& a, BeliefState const& b);

} // namespace reactod
