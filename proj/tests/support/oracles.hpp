// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <reactod/metrics.hpp>

#include <optional>
#include <string>
#include <vector>

namespace reactod::testing
{

/// Runs `sequences` random update sequences through apply_update and
/// gold_delta and checks the state protocol after every step. Returns a
/// description of the first broken property, or nothing.
std::optional<std::string> state_protocol_violation(int sequences, unsigned seed);

/// Reference fuzzy score written from scratch: full DP matrix, no shared code.
double oracle_fuzzy(std::string const& a, std::string const& b);

/// Brute-force JGA: per-turn map comparison, straight from the definitions.
struct OracleJga
{
    double overall = 0.0;
    std::map<std::string, double> per_domain;
    double domain_avg = 0.0;
    std::map<std::string, double> per_service;
    double service_avg = 0.0;
};

OracleJga oracle_jga(std::vector<ScoredTurn> const& turns, double threshold);

/// Random scored dialogues mixing exact, near-miss and missing values over
/// several domains and SGD-style services.
std::vector<ScoredTurn> random_scored_dialogues(int dialogues, int max_turns, unsigned seed);

/// Compares the mini MultiWOZ / SGD fixtures against their frozen
/// expected_states.json. Returns the first difference, or nothing.
std::optional<std::string> multiwoz_mini_mismatch();
std::optional<std::string> sgd_mini_mismatch();

/// Synthetic trace set with a fixed validator activation profile: 7,372
/// turns, 683 impacted (636 recovered, 47 exhausted) and 1,606 feedback
/// messages (771 MissingPrerequisiteIC, 222 UndefinedTool, 77 DuplicateCall,
/// 274 EnumViolation, 58 UnknownSlot, 47 UnknownIntent, 157 GenericReference).
std::vector<TurnRecord> activation_profile_records();

} // namespace reactod::testing
