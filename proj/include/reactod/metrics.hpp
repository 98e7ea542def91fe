// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <reactod/trace.hpp>
#include <reactod/validator.hpp>

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace reactod
{

/// Token-sort similarity: lowercase, drop punctuation, sort whitespace
/// tokens, then 1 - levenshtein / max_len. Two empty strings score 1.
double fuzzy_match(std::string_view a, std::string_view b);

/// The normalized, token-sorted form fuzzy_match compares.
std::string token_sort_key(std::string_view s);

std::size_t levenshtein(std::string_view a, std::string_view b);

/// Linear interpolation at rank 1 + p/100 * (n - 1) over the sorted values.
/// Throws EmptyInput on an empty list, InvalidArgument when p is outside (0, 100].
double percentile(std::vector<double> values, double p);

struct MatchConfig
{
    bool fuzzy = true;       // token-sort matching for non-categorical slots
    double threshold = 0.95; // minimum fuzzy score counted as a match
};

/// Categorical slots compare exactly (case and surrounding space ignored);
/// others by fuzzy_match >= threshold against the value or any alternative.
bool slot_matches(std::string_view predicted, GoldSlot const& gold, MatchConfig const& config = {});

using PredStateMap = std::map<std::string, std::string>; // slot -> norm

/// Every gold slot matched and no predicted slot outside gold.
bool states_match(PredStateMap const& predicted, GoldStateMap const& gold, MatchConfig const& config = {});

/// One evaluation unit: a predicted state next to its gold state.
struct ScoredTurn
{
    std::string dialogue_id;
    int turn = 0;
    PredStateMap predicted;
    GoldStateMap gold;
    std::vector<std::string> active_domains; // SGD: services of the turn's frames
    std::optional<std::string> service;
};

ScoredTurn scored_turn(TurnRecord const& record);

/// Pairs predictions with gold turns. Throws AlignmentError on a count mismatch.
std::vector<ScoredTurn> align(std::vector<BeliefState> const& predicted, std::vector<GoldTurn> const& gold, Schema const& schema);

enum class JgaScope
{
    Overall,
    PerDomain,
    PerService,
};

/// Domain family of an active domain: "restaurants_1" -> "restaurants".
std::string domain_family(std::string_view domain);

struct JgaResult
{
    std::optional<double> overall;             // Overall scope
    std::map<std::string, double> per_key;     // PerDomain / PerService scopes
    std::map<std::string, int> units;          // evaluation units behind each per_key entry
    std::optional<double> macro;               // unweighted mean of per_key
    int turns = 0;
};

/// Overall: full state comparison on every turn. PerDomain: states projected
/// onto each active domain, grouped by domain family, macro-averaged.
/// PerService: one unit per (turn, service frame) on service-tagged turns,
/// macro-averaged across services.
JgaResult joint_goal_accuracy(std::vector<ScoredTurn> const& turns, JgaScope scope, MatchConfig const& config = {});

struct Stats
{
    double avg = 0.0;
    double p50 = 0.0;
    double p99 = 0.0;

    bool operator==(Stats const&) const = default;
};

/// Throws EmptyInput on an empty list.
Stats summarize(std::vector<double> const& values);

/// Validator activity of one turn: one code per feedback message.
struct ActivationTurn
{
    std::vector<ViolationCode> messages;
    bool degraded = false;
};

ActivationTurn activation_turn(TurnRecord const& record);

struct CategoryActivation
{
    int impacted = 0;
    int recovered = 0;
    int exhausted = 0;
    std::optional<double> recovery_rate;
    int messages = 0;
};

struct ActivationReport
{
    int total_turns = 0;
    int impacted_turns = 0;
    std::optional<double> impacted_share;
    int recovered = 0;
    int exhausted = 0;
    std::optional<double> recovery_rate; // empty when nothing was impacted
    int total_messages = 0;
    std::map<ViolationCode, int> messages_by_code;
    std::map<ViolationCategory, CategoryActivation> by_category;
};

ActivationReport validator_activation_report(std::vector<ActivationTurn> const& turns);

struct EvalReport
{
    int dialogues = 0;
    int turns = 0;
    int degraded_turns = 0;
    std::optional<double> overall_jga;
    std::map<std::string, double> domain_jga;
    std::optional<double> domain_avg_jga;
    std::map<std::string, double> service_jga;
    std::optional<double> avg_service_jga;
    std::optional<Stats> calls_stats;
    std::optional<Stats> token_stats;
    ActivationReport activation;
    MatchConfig match;
    nlohmann::ordered_json manifest = nlohmann::ordered_json::object();
};

/// Folds trace records into a report. Order-insensitive.
EvalReport build_report(std::vector<TurnRecord> const& records, MatchConfig const& match = {});

nlohmann::ordered_json report_to_json(EvalReport const& report);
std::string serialize_report(EvalReport const& report); // dump(2) + newline

/// Fixed-width text tables: accuracy, efficiency, validator activation.
std::string render_report_table(EvalReport const& report);

} // namespace reactod
