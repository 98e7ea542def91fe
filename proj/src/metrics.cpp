// SPDX-License-Identifier: Apache-2.0
#include <reactod/errors.hpp>
#include <reactod/metrics.hpp>
#include <reactod/text.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numeric>
#include <set>

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

namespace reactod
{

// {{{ string similarity

std::string token_sort_key(std::string_view s)
{
    auto cleaned = std::string {};
    cleaned.reserve(s.size());
    for (unsigned char c: s)
    {
        if (c >= 0x80 || std::isalnum(c))
            cleaned.push_back(static_cast<char>(std::tolower(c)));
        else
            cleaned.push_back(' ');
    }
    auto tokens = text::split_whitespace(cleaned);
    std::ranges::sort(tokens);
    return text::join(tokens, " ");
}

std::size_t levenshtein(std::string_view a, std::string_view b)
{
    auto row = std::vector<std::size_t>(b.size() + 1);
    std::iota(row.begin(), row.end(), std::size_t { 0 });
    for (auto i = std::size_t { 1 }; i <= a.size(); ++i)
    {
        auto diagonal = row[0];
        row[0] = i;
        for (auto j = std::size_t { 1 }; j <= b.size(); ++j)
        {
            auto const above = row[j];
            row[j] = std::min({ row[j] + 1, row[j - 1] + 1, diagonal + (a[i - 1] == b[j - 1] ? 0 : 1) });
            diagonal = above;
        }
    }
    return row[b.size()];
}

double fuzzy_match(std::string_view a, std::string_view b)
{
    auto const ka = token_sort_key(a);
    auto const kb = token_sort_key(b);
    auto const longest = std::max(ka.size(), kb.size());
    if (longest == 0)
        return 1.0;
    return 1.0 - static_cast<double>(levenshtein(ka, kb)) / static_cast<double>(longest);
}

// }}}
// {{{ statistics

double percentile(std::vector<double> values, double p)
{
    if (values.empty())
        throw EmptyInput("percentile of an empty list");
    if (!(p > 0.0 && p <= 100.0))
        throw InvalidArgument(fmt::format("percentile rank {} outside (0, 100]", p));
    std::ranges::sort(values);
    auto const rank = 1.0 + p / 100.0 * static_cast<double>(values.size() - 1);
    auto const lower = static_cast<std::size_t>(std::floor(rank));
    auto const fraction = rank - static_cast<double>(lower);
    if (lower >= values.size())
        return values.back();
    return values[lower - 1] + fraction * (values[lower] - values[lower - 1]);
}

Stats summarize(std::vector<double> const& values)
{
    if (values.empty())
        throw EmptyInput("no values to summarize");
    auto const sum = std::accumulate(values.begin(), values.end(), 0.0);
    return Stats {
        .avg = sum / static_cast<double>(values.size()),
        .p50 = percentile(values, 50.0),
        .p99 = percentile(values, 99.0),
    };
}

// }}}
// {{{ JGA

bool slot_matches(std::string_view predicted, GoldSlot const& gold, MatchConfig const& config)
{
    auto const matchOne = [&](std::string_view candidate) {
        if (gold.categorical || !config.fuzzy)
            return text::normalize_key(predicted) == text::normalize_key(candidate);
        return fuzzy_match(predicted, candidate) >= config.threshold;
    };
    if (matchOne(gold.value))
        return true;
    return std::ranges::any_of(gold.alternatives, matchOne);
}

bool states_match(PredStateMap const& predicted, GoldStateMap const& gold, MatchConfig const& config)
{
    for (auto const& [slot, value]: predicted)
        if (!gold.contains(slot))
            return false;
    for (auto const& [slot, g]: gold)
    {
        auto const it = predicted.find(slot);
        if (it == predicted.end() || !slot_matches(it->second, g, config))
            return false;
    }
    return true;
}

ScoredTurn scored_turn(TurnRecord const& record)
{
    auto turn = ScoredTurn {};
    turn.dialogue_id = record.dialogue_id;
    turn.turn = record.turn;
    for (auto const& [slot, value]: record.state)
        turn.predicted.emplace(slot, value.norm);
    turn.gold = record.gold;
    turn.active_domains = record.active_domains;
    turn.service = record.service;
    return turn;
}

std::vector<ScoredTurn> align(std::vector<BeliefState> const& predicted, std::vector<GoldTurn> const& gold, Schema const& schema)
{
    if (predicted.size() != gold.size())
        throw AlignmentError(fmt::format("{} predictions for {} gold turns", predicted.size(), gold.size()));
    auto out = std::vector<ScoredTurn> {};
    out.reserve(gold.size());
    for (auto i = std::size_t { 0 }; i < gold.size(); ++i)
    {
        auto turn = ScoredTurn {};
        turn.dialogue_id = gold[i].dialogue_id;
        turn.turn = gold[i].turn;
        for (auto const& [slot, value]: predicted[i].entries)
            turn.predicted.emplace(slot, value.norm);
        turn.gold = gold_slots(gold[i], schema);
        turn.active_domains = gold[i].active_domains;
        turn.service = gold[i].service;
        out.push_back(std::move(turn));
    }
    return out;
}

std::string domain_family(std::string_view domain)
{
    auto const underscore = domain.rfind('_');
    if (underscore == std::string_view::npos || underscore + 1 == domain.size())
        return std::string(domain);
    auto const suffix = domain.substr(underscore + 1);
    if (!std::ranges::all_of(suffix, [](unsigned char c) { return std::isdigit(c) != 0; }))
        return std::string(domain);
    return std::string(domain.substr(0, underscore));
}

namespace
{
    template <typename Map>
    Map project(Map const& m, std::string_view domain)
    {
        auto out = Map {};
        for (auto const& [slot, value]: m)
            if (slot_domain(slot) == domain)
                out.emplace(slot, value);
        return out;
    }

    struct Tally
    {
        int hits = 0;
        int units = 0;
    };

    void finish(JgaResult& result, std::map<std::string, Tally> const& tallies)
    {
        for (auto const& [key, t]: tallies)
        {
            result.per_key[key] = static_cast<double>(t.hits) / t.units;
            result.units[key] = t.units;
        }
        if (!result.per_key.empty())
        {
            auto sum = 0.0;
            for (auto const& [key, v]: result.per_key)
                sum += v;
            result.macro = sum / static_cast<double>(result.per_key.size());
        }
    }
} // namespace

JgaResult joint_goal_accuracy(std::vector<ScoredTurn> const& turns, JgaScope scope, MatchConfig const& config)
{
    auto result = JgaResult {};
    result.turns = static_cast<int>(turns.size());

    switch (scope)
    {
        case JgaScope::Overall: {
            if (turns.empty())
                return result;
            auto hits = 0;
            for (auto const& t: turns)
                hits += states_match(t.predicted, t.gold, config) ? 1 : 0;
            result.overall = static_cast<double>(hits) / static_cast<double>(turns.size());
            return result;
        }
        case JgaScope::PerDomain:
        case JgaScope::PerService: {
            auto tallies = std::map<std::string, Tally> {};
            for (auto const& t: turns)
            {
                if (scope == JgaScope::PerService && !t.service)
                    continue;
                auto seen = std::set<std::string> {};
                for (auto const& domain: t.active_domains)
                {
                    if (!seen.insert(domain).second)
                        continue;
                    auto const hit = states_match(project(t.predicted, domain), project(t.gold, domain), config);
                    auto& tally = tallies[scope == JgaScope::PerService ? domain : domain_family(domain)];
                    tally.units += 1;
                    tally.hits += hit ? 1 : 0;
                }
            }
            finish(result, tallies);
            return result;
        }
    }
    return result;
}

// }}}
// {{{ validator activation

ActivationTurn activation_turn(TurnRecord const& record)
{
    auto turn = ActivationTurn { .messages = {}, .degraded = record.degraded };
    for (auto const& step: record.steps)
        for (auto const& v: step.validation)
            if (auto const code = code_from_string(v.code))
                turn.messages.push_back(*code);
    return turn;
}

ActivationReport validator_activation_report(std::vector<ActivationTurn> const& turns)
{
    auto report = ActivationReport {};
    report.total_turns = static_cast<int>(turns.size());
    for (auto const category: kAllCategories)
        report.by_category[category] = CategoryActivation {};
    for (auto const code: kAllCodes)
        report.messages_by_code[code] = 0;

    for (auto const& turn: turns)
    {
        if (turn.messages.empty())
            continue;
        ++report.impacted_turns;
        ++(turn.degraded ? report.exhausted : report.recovered);

        auto categories = std::set<ViolationCategory> {};
        for (auto const code: turn.messages)
        {
            ++report.messages_by_code[code];
            ++report.total_messages;
            ++report.by_category[category_of(code)].messages;
            categories.insert(category_of(code));
        }
        for (auto const category: categories)
        {
            auto& c = report.by_category[category];
            ++c.impacted;
            ++(turn.degraded ? c.exhausted : c.recovered);
        }
    }

    if (report.total_turns > 0)
        report.impacted_share = static_cast<double>(report.impacted_turns) / report.total_turns;
    if (report.impacted_turns > 0)
        report.recovery_rate = static_cast<double>(report.recovered) / report.impacted_turns;
    for (auto& [category, c]: report.by_category)
        if (c.impacted > 0)
            c.recovery_rate = static_cast<double>(c.recovered) / c.impacted;
    return report;
}

// }}}
// {{{ reports

EvalReport build_report(std::vector<TurnRecord> const& records, MatchConfig const& match)
{
    auto report = EvalReport {};
    report.match = match;
    report.turns = static_cast<int>(records.size());

    auto dialogues = std::set<std::string> {};
    auto scored = std::vector<ScoredTurn> {};
    auto activation = std::vector<ActivationTurn> {};
    auto calls = std::vector<double> {};
    auto tokens = std::vector<double> {};
    for (auto const& r: records)
    {
        dialogues.insert(r.dialogue_id);
        scored.push_back(scored_turn(r));
        activation.push_back(activation_turn(r));
        calls.push_back(r.llm_calls);
        tokens.push_back(r.output_tokens);
        report.degraded_turns += r.degraded ? 1 : 0;
    }
    report.dialogues = static_cast<int>(dialogues.size());

    report.overall_jga = joint_goal_accuracy(scored, JgaScope::Overall, match).overall;
    auto const perDomain = joint_goal_accuracy(scored, JgaScope::PerDomain, match);
    report.domain_jga = perDomain.per_key;
    report.domain_avg_jga = perDomain.macro;
    auto const perService = joint_goal_accuracy(scored, JgaScope::PerService, match);
    report.service_jga = perService.per_key;
    report.avg_service_jga = perService.macro;

    if (!records.empty())
    {
        report.calls_stats = summarize(calls);
        report.token_stats = summarize(tokens);
    }
    report.activation = validator_activation_report(activation);
    return report;
}

namespace
{
    ordered_json opt(std::optional<double> const& v)
    {
        return v ? ordered_json(*v) : ordered_json(nullptr);
    }

    ordered_json stats_json(std::optional<Stats> const& s)
    {
        if (!s)
            return nullptr;
        return ordered_json { { "avg", s->avg }, { "p50", s->p50 }, { "p99", s->p99 } };
    }

    std::string pct(std::optional<double> const& v)
    {
        return v ? fmt::format("{:.2f}", *v * 100.0) : std::string("n/a");
    }
} // namespace

ordered_json report_to_json(EvalReport const& r)
{
    auto domains = ordered_json::object();
    for (auto const& [k, v]: r.domain_jga)
        domains[k] = v;
    auto services = ordered_json::object();
    for (auto const& [k, v]: r.service_jga)
        services[k] = v;

    auto byCode = ordered_json::object();
    for (auto const& [code, n]: r.activation.messages_by_code)
        byCode[std::string(to_string(code))] = n;
    auto byCategory = ordered_json::object();
    for (auto const& [category, c]: r.activation.by_category)
        byCategory[std::string(to_string(category))] = ordered_json {
            { "impacted", c.impacted },   { "recovered", c.recovered },         { "exhausted", c.exhausted },
            { "messages", c.messages },   { "recovery_rate", opt(c.recovery_rate) },
        };

    return ordered_json {
        { "dialogues", r.dialogues },
        { "turns", r.turns },
        { "degraded_turns", r.degraded_turns },
        { "jga",
          { { "overall", opt(r.overall_jga) },
            { "domain", std::move(domains) },
            { "domain_avg", opt(r.domain_avg_jga) },
            { "service", std::move(services) },
            { "service_avg", opt(r.avg_service_jga) } } },
        { "efficiency", { { "llm_calls_per_turn", stats_json(r.calls_stats) }, { "output_tokens_per_turn", stats_json(r.token_stats) } } },
        { "activation",
          { { "total_turns", r.activation.total_turns },
            { "impacted_turns", r.activation.impacted_turns },
            { "impacted_share", opt(r.activation.impacted_share) },
            { "recovered", r.activation.recovered },
            { "exhausted", r.activation.exhausted },
            { "recovery_rate", opt(r.activation.recovery_rate) },
            { "total_messages", r.activation.total_messages },
            { "messages_by_code", std::move(byCode) },
            { "by_category", std::move(byCategory) } } },
        { "match", { { "fuzzy", r.match.fuzzy }, { "threshold", r.match.threshold } } },
        { "manifest", r.manifest },
    };
}

std::string serialize_report(EvalReport const& report)
{
    return report_to_json(report).dump(2) + "\n";
}

std::string render_report_table(EvalReport const& r)
{
    auto out = std::string {};
    auto const line = [&](std::string_view pattern, auto const&... args) {
        out += fmt::format(fmt::runtime(pattern), args...);
        out += "\n";
    };

    line("Joint goal accuracy (%), {} dialogues, {} turns", r.dialogues, r.turns);
    line("  {:<28} {:>8} {:>8}", "Scope", "JGA", "Units");
    line("  {:<28} {:>8} {:>8}", "Overall", pct(r.overall_jga), r.turns);
    for (auto const& [domain, v]: r.domain_jga)
        line("  {:<28} {:>8} {:>8}", domain, pct(v), "");
    line("  {:<28} {:>8} {:>8}", "Domain Avg.", pct(r.domain_avg_jga), "");
    if (!r.service_jga.empty())
    {
        for (auto const& [service, v]: r.service_jga)
            line("  {:<28} {:>8} {:>8}", service, pct(v), "");
        line("  {:<28} {:>8} {:>8}", "Avg. Service JGA", pct(r.avg_service_jga), "");
    }
    line("");

    line("Efficiency");
    line("  {:<28} {:>10} {:>10} {:>10}", "Metric", "Avg", "P50", "P99");
    auto const statsRow = [&](std::string_view label, std::optional<Stats> const& s) {
        if (s)
            line("  {:<28} {:>10.2f} {:>10.2f} {:>10.2f}", label, s->avg, s->p50, s->p99);
        else
            line("  {:<28} {:>10} {:>10} {:>10}", label, "n/a", "n/a", "n/a");
    };
    statsRow("LLM Calls / Turn", r.calls_stats);
    statsRow("Output Tokens / Turn", r.token_stats);
    line("  {:<28} {:>10}", "Degraded turns", r.degraded_turns);
    line("");

    auto const& a = r.activation;
    line("Validator activation");
    line("  Impacted turns: {} of {} ({}%)", a.impacted_turns, a.total_turns, pct(a.impacted_share));
    line("  Feedback messages: {}", a.total_messages);
    for (auto const& [code, n]: a.messages_by_code)
        line("    {:<26} {:>8}", to_string(code), n);
    line("  {:<28} {:>9} {:>10} {:>10} {:>9}", "Category", "Impacted", "Recovered", "Exhausted", "Rate (%)");
    for (auto const& [category, c]: a.by_category)
        line("  {:<28} {:>9} {:>10} {:>10} {:>9}", to_string(category), c.impacted, c.recovered, c.exhausted, pct(c.recovery_rate));
    line("  {:<28} {:>9} {:>10} {:>10} {:>9}", "Overall", a.impacted_turns, a.recovered, a.exhausted, pct(a.recovery_rate));
    return out;
}

// }}}

} // namespace reactod
