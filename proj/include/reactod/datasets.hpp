// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <reactod/belief_state.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace reactod
{

/// One user turn with its gold annotation.
///
/// `system_utterance` is the system response that follows the user
/// utterance, so turn t is conditioned on the response of turn t-1.
struct GoldTurn
{
    std::string dialogue_id;
    int turn = 0;
    std::string user_utterance;
    std::string system_utterance;
    BeliefState gold_state; // cumulative
    std::vector<std::string> active_domains;
    std::optional<std::string> service; // SGD: first frame's service
    /// SGD lists equivalent surface forms for some values; any of them matches.
    std::map<std::string, std::vector<std::string>> alternatives;
};

struct Dialogue
{
    std::string id;
    std::vector<GoldTurn> turns;
};

/// MultiWOZ 2.1 test split from a directory holding data.json and testListFile.txt.
/// Throws SplitListMissing when the list file is absent, ParseError otherwise.
std::vector<Dialogue> load_multiwoz(std::string const& path);

/// MultiWOZ 2.1 test split from in-memory documents.
std::vector<Dialogue> parse_multiwoz(std::string_view data_json, std::string_view test_list);

/// Canonical value for a MultiWOZ 2.1 label; empty for "not mentioned"/"none".
std::string normalize_multiwoz_value(std::string_view value);
/// Canonical slot id for a MultiWOZ 2.1 metadata key ("book", "leaveAt") pair.
std::string multiwoz_slot_id(std::string_view domain, std::string_view key, bool book);

/// SGD test split from a directory holding schema.json and dialogues_*.json
/// (either the directory itself or its "test" subdirectory).
std::vector<Dialogue> load_sgd(std::string const& dir);

/// SGD dialogues from in-memory documents; every service used by a dialogue
/// must be declared in the schema document.
std::vector<Dialogue> parse_sgd(std::string_view schema_json, std::vector<std::string> const& dialogue_files);

} // namespace reactod
