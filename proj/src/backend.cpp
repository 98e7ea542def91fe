// SPDX-License-Identifier: Apache-2.0
#include <reactod/backend.hpp>
#include <reactod/errors.hpp>
#include <reactod/text.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <sstream>

using json = nlohmann::json;

namespace reactod
{

std::string_view to_string(Role role)
{
    switch (role)
    {
        case Role::System: return "system";
        case Role::User: return "user";
        case Role::Assistant: return "assistant";
        case Role::Tool: return "tool";
    }
    return "user";
}

int estimate_output_tokens(std::string_view text)
{
    return static_cast<int>(text::split_whitespace(text).size());
}

namespace
{
    json native_calls_to_json(std::vector<NativeCall> const& calls)
    {
        auto out = json::array();
        for (auto const& c: calls)
            out.push_back({ { "id", c.id }, { "name", c.name }, { "arguments", c.arguments } });
        return out;
    }

    std::vector<NativeCall> native_calls_from_json(json const& j)
    {
        if (!j.is_array())
            throw ParseError("native_calls must be an array");
        auto out = std::vector<NativeCall> {};
        for (auto const& c: j)
        {
            if (!c.is_object() || !c.contains("name") || !c["name"].is_string())
                throw ParseError("native call entries need a string 'name'");
            out.push_back(NativeCall {
                .id = c.value("id", ""),
                .name = c["name"].get<std::string>(),
                .arguments = c.value("arguments", json::object()),
            });
        }
        return out;
    }

    std::uint64_t fnv1a(std::string_view data)
    {
        auto hash = std::uint64_t { 14695981039346656037ULL };
        for (unsigned char c: data)
        {
            hash ^= c;
            hash *= 1099511628211ULL;
        }
        return hash;
    }

    CompletionResult to_result(FixtureEntry const& entry)
    {
        auto result = CompletionResult { .text = entry.response_text, .native_calls = entry.native_calls, .output_tokens = 0, .tokens_estimated = false };
        if (entry.output_tokens)
            result.output_tokens = *entry.output_tokens;
        else
        {
            auto all = entry.response_text.value_or("");
            if (entry.native_calls)
                for (auto const& c: *entry.native_calls)
                    all += " " + c.arguments.dump();
            result.output_tokens = estimate_output_tokens(all);
            result.tokens_estimated = true;
        }
        return result;
    }
} // namespace

json request_to_json(CompletionRequest const& request)
{
    auto messages = json::array();
    for (auto const& m: request.messages)
    {
        auto jm = json { { "role", to_string(m.role) }, { "content", m.content } };
        if (!m.tool_calls.empty())
            jm["tool_calls"] = native_calls_to_json(m.tool_calls);
        if (!m.tool_call_id.empty())
            jm["tool_call_id"] = m.tool_call_id;
        messages.push_back(std::move(jm));
    }
    return json {
        { "messages", std::move(messages) },
        { "tools", request.tool_signatures },
        { "temperature", request.temperature },
        { "max_output_tokens", request.max_output_tokens },
    };
}

std::string request_fingerprint(CompletionRequest const& request)
{
    return fmt::format("{:016x}", fnv1a(request_to_json(request).dump()));
}

// {{{ fixtures

std::vector<FixtureEntry> parse_fixture(std::string_view jsonl)
{
    auto entries = std::vector<FixtureEntry> {};
    auto stream = std::istringstream(std::string(jsonl));
    auto line = std::string {};
    auto lineNo = 0;
    while (std::getline(stream, line))
    {
        ++lineNo;
        if (text::trim(line).empty())
            continue;
        auto j = json {};
        try
        {
            j = json::parse(line);
        }
        catch (json::parse_error const& e)
        {
            throw ParseError(fmt::format("fixture line {}: {}", lineNo, e.what()));
        }
        if (!j.is_object())
            throw ParseError(fmt::format("fixture line {}: expected an object", lineNo));

        auto entry = FixtureEntry {};
        entry.fingerprint = j.value("fingerprint", "");
        if (auto const it = j.find("response_text"); it != j.end() && it->is_string())
            entry.response_text = it->get<std::string>();
        if (auto const it = j.find("native_calls"); it != j.end() && !it->is_null())
            entry.native_calls = native_calls_from_json(*it);
        if (auto const it = j.find("output_tokens"); it != j.end() && it->is_number_integer())
            entry.output_tokens = it->get<int>();
        if (!entry.response_text && !entry.native_calls)
            throw ParseError(fmt::format("fixture line {}: needs response_text or native_calls", lineNo));
        entries.push_back(std::move(entry));
    }
    return entries;
}

std::vector<FixtureEntry> load_fixture_file(std::string const& path)
{
    auto in = std::ifstream(path);
    if (!in)
        throw ParseError(fmt::format("cannot open fixture '{}'", path));
    auto buffer = std::stringstream {};
    buffer << in.rdbuf();
    return parse_fixture(buffer.str());
}

std::string serialize_fixture(std::vector<FixtureEntry> const& entries)
{
    auto out = std::string {};
    for (auto const& e: entries)
    {
        auto j = json::object();
        j["fingerprint"] = e.fingerprint;
        if (e.response_text)
            j["response_text"] = *e.response_text;
        if (e.native_calls)
            j["native_calls"] = native_calls_to_json(*e.native_calls);
        if (e.output_tokens)
            j["output_tokens"] = *e.output_tokens;
        out += j.dump() + "\n";
    }
    return out;
}

// }}}
// {{{ ScriptedBackend

ScriptedBackend::ScriptedBackend(std::vector<FixtureEntry> entries):
    _entries(std::move(entries)), _used(_entries.size(), false)
{
}

CompletionResult ScriptedBackend::complete(CompletionRequest const& request)
{
    auto const fingerprint = request_fingerprint(request);
    auto const lock = std::scoped_lock(_mutex);

    for (auto i = std::size_t { 0 }; i < _entries.size(); ++i)
        if (!_used[i] && !_entries[i].fingerprint.empty() && _entries[i].fingerprint == fingerprint)
        {
            _used[i] = true;
            return to_result(_entries[i]);
        }

    while (_nextPositional < _entries.size() && (_used[_nextPositional] || !_entries[_nextPositional].fingerprint.empty()))
        ++_nextPositional;
    if (_nextPositional == _entries.size())
        throw ScriptExhausted(fmt::format("script exhausted: no fixture entry left for request {}", fingerprint));

    _used[_nextPositional] = true;
    return to_result(_entries[_nextPositional++]);
}

std::size_t ScriptedBackend::remaining() const
{
    auto const lock = std::scoped_lock(_mutex);
    return static_cast<std::size_t>(std::count(_used.begin(), _used.end(), false));
}

// }}}
// {{{ RecordingBackend

RecordingBackend::RecordingBackend(CompletionBackend& inner): _inner(inner)
{
}

CompletionResult RecordingBackend::complete(CompletionRequest const& request)
{
    auto result = _inner.complete(request);
    auto entry = FixtureEntry {
        .fingerprint = request_fingerprint(request),
        .response_text = result.text,
        .native_calls = result.native_calls,
        .output_tokens = result.tokens_estimated ? std::nullopt : std::optional<int>(result.output_tokens),
    };
    auto const lock = std::scoped_lock(_mutex);
    _captured.push_back(std::move(entry));
    return result;
}

std::vector<FixtureEntry> RecordingBackend::fixture() const
{
    auto const lock = std::scoped_lock(_mutex);
    return _captured;
}

std::vector<FixtureEntry> record_and_replay(RecordingBackend const& session)
{
    return session.fixture();
}

// }}}

} // namespace reactod
