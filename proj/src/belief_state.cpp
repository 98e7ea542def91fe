// SPDX-License-Identifier: Apache-2.0
#include <reactod/belief_state.hpp>
#include <reactod/errors.hpp>

#include <fmt/format.h>

#include <algorithm>

namespace reactod
{

std::string const* BeliefState::norm(std::string_view slot) const
{
    auto const it = entries.find(std::string(slot));
    return it == entries.end() ? nullptr : &it->second.norm;
}

BeliefState apply_update(BeliefState const& prev, StateUpdate const& delta, int turn)
{
    auto next = prev;
    next.turn_index = turn;
    for (auto const& [slot, value]: delta.changes)
    {
        if (value.is_null())
            next.entries.erase(slot);
        else
            next.entries.insert_or_assign(slot, value);
    }
    return next;
}

StateUpdate gold_delta(BeliefState const& prev_gold, BeliefState const& curr_gold)
{
    auto delta = StateUpdate {};
    for (auto const& [slot, value]: curr_gold.entries)
    {
        auto const* before = prev_gold.norm(slot);
        if (!before || *before != value.norm)
            delta.changes.emplace(slot, value);
    }
    for (auto const& [slot, value]: prev_gold.entries)
        if (!curr_gold.contains(slot))
            delta.changes.emplace(slot,
                                  SlotValue { .raw = std::string(kNullSentinel),
                                              .norm = std::string(kNullSentinel),
                                              .source_turn = curr_gold.turn_index });
    return delta;
}

BeliefState project_domain(BeliefState const& state, std::string_view domain)
{
    auto out = BeliefState { .entries = {}, .turn_index = state.turn_index };
    for (auto const& [slot, value]: state.entries)
        if (slot_domain(slot) == domain)
            out.entries.emplace(slot, value);
    return out;
}

BeliefState project_domain(BeliefState const& state, std::string_view domain, Schema const& schema)
{
    auto const domains = schema.domains();
    if (std::ranges::find(domains, domain) == domains.end())
        throw UnknownDomain(fmt::format("unknown domain '{}'", domain));
    return project_domain(state, domain);
}

bool same_norms(BeliefState const& a, BeliefState const& b)
{
    return std::ranges::equal(a.entries, b.entries, [](auto const& x, auto const& y) {
        return x.first == y.first && x.second.norm == y.second.norm;
    });
}

} // namespace reactod
