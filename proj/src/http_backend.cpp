// SPDX-License-Identifier: Apache-2.0
#include <reactod/backend.hpp>
#include <reactod/errors.hpp>

#include <fmt/format.h>

#include <cstdlib>

#include <httplib.h>

using json = nlohmann::json;

namespace reactod
{

namespace
{
    std::string env_or_empty(char const* name)
    {
        auto const* value = std::getenv(name);
        return value ? std::string(value) : std::string {};
    }

    // "https://host:8000/v1" -> {"https://host:8000", "/v1"}
    std::pair<std::string, std::string> split_base(std::string base)
    {
        while (!base.empty() && base.back() == '/')
            base.pop_back();
        auto const scheme = base.find("://");
        auto const pathStart = base.find('/', scheme == std::string::npos ? 0 : scheme + 3);
        if (pathStart == std::string::npos)
            return { base, "" };
        return { base.substr(0, pathStart), base.substr(pathStart) };
    }

    json message_to_wire(Message const& m)
    {
        auto out = json { { "role", to_string(m.role) } };
        if (m.role == Role::Assistant && !m.tool_calls.empty())
        {
            out["content"] = m.content.empty() ? json(nullptr) : json(m.content);
            auto calls = json::array();
            for (auto const& c: m.tool_calls)
                calls.push_back({ { "id", c.id },
                                  { "type", "function" },
                                  { "function", { { "name", c.name }, { "arguments", c.arguments.dump() } } } });
            out["tool_calls"] = std::move(calls);
        }
        else
            out["content"] = m.content;
        if (m.role == Role::Tool)
            out["tool_call_id"] = m.tool_call_id;
        return out;
    }
} // namespace

std::optional<HttpBackendConfig> HttpBackendConfig::from_environment()
{
    auto config = HttpBackendConfig {};
    config.api_base = env_or_empty("REACTOD_API_BASE");
    config.api_key = env_or_empty("REACTOD_API_KEY");
    config.model = env_or_empty("REACTOD_MODEL");
    if (config.api_base.empty() || config.model.empty())
        return std::nullopt;
    return config;
}

HttpBackend::HttpBackend(HttpBackendConfig config): _config(std::move(config))
{
}

json HttpBackend::build_payload(CompletionRequest const& request) const
{
    auto messages = json::array();
    for (auto const& m: request.messages)
        messages.push_back(message_to_wire(m));

    auto payload = json {
        { "model", _config.model },
        { "messages", std::move(messages) },
        { "temperature", request.temperature },
        { "max_tokens", request.max_output_tokens },
    };
    if (request.tool_signatures.is_array() && !request.tool_signatures.empty())
    {
        payload["tools"] = request.tool_signatures;
        payload["tool_choice"] = "auto";
    }
    return payload;
}

CompletionResult HttpBackend::complete(CompletionRequest const& request)
{
    auto const [host, prefix] = split_base(_config.api_base);
    auto client = httplib::Client(host);
    client.set_connection_timeout(_config.timeout);
    client.set_read_timeout(_config.timeout);
    client.set_write_timeout(_config.timeout);

    auto headers = httplib::Headers {};
    if (!_config.api_key.empty())
        headers.emplace("Authorization", "Bearer " + _config.api_key);

    auto const response = client.Post(prefix + "/chat/completions", headers, build_payload(request).dump(), "application/json");
    if (!response)
        throw TransportError(fmt::format("request to {} failed: {}", _config.api_base, httplib::to_string(response.error())));
    if (response->status >= 500 || response->status == 429)
        throw TransportError(fmt::format("endpoint returned HTTP {}", response->status));
    if (response->status != 200)
        throw ContractError(fmt::format("endpoint returned HTTP {}: {}", response->status, response->body.substr(0, 200)));
    return parse_chat_completion(response->body);
}

CompletionResult parse_chat_completion(std::string_view body)
{
    auto doc = json {};
    try
    {
        doc = json::parse(body);
    }
    catch (json::parse_error const& e)
    {
        throw ContractError(fmt::format("response body is not JSON: {}", e.what()));
    }

    auto const choices = doc.find("choices");
    if (choices == doc.end() || !choices->is_array() || choices->empty() || !(*choices)[0].contains("message"))
        throw ContractError("response has no choices[0].message");
    auto const& message = (*choices)[0]["message"];

    auto result = CompletionResult {};
    if (auto const it = message.find("content"); it != message.end() && it->is_string())
        result.text = it->get<std::string>();

    auto countedText = result.text.value_or("");
    if (auto const it = message.find("tool_calls"); it != message.end() && it->is_array() && !it->empty())
    {
        auto calls = std::vector<NativeCall> {};
        for (auto const& c: *it)
        {
            if (!c.contains("function") || !c["function"].contains("name"))
                throw ContractError("tool call without function.name");
            auto const& function = c["function"];
            auto call = NativeCall { .id = c.value("id", ""), .name = function["name"].get<std::string>(), .arguments = json::object() };
            if (auto const args = function.find("arguments"); args != function.end())
            {
                if (args->is_string())
                {
                    countedText += " " + args->get<std::string>();
                    // Malformed argument text is model output; the validator reports it.
                    call.arguments = json::parse(args->get<std::string>(), nullptr, false);
                    if (call.arguments.is_discarded())
                        call.arguments = args->get<std::string>();
                }
                else
                    call.arguments = *args;
            }
            calls.push_back(std::move(call));
        }
        result.native_calls = std::move(calls);
    }
    if (!result.text && !result.native_calls)
        result.text = "";

    auto const usage = doc.find("usage");
    if (usage != doc.end() && usage->is_object() && usage->contains("completion_tokens") && (*usage)["completion_tokens"].is_number_integer())
        result.output_tokens = (*usage)["completion_tokens"].get<int>();
    else
    {
        result.output_tokens = estimate_output_tokens(countedText);
        result.tokens_estimated = true;
    }
    return result;
}

} // namespace reactod
