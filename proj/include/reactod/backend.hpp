// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

namespace reactod
{

enum class Role
{
    System,
    User,
    Assistant,
    Tool,
};

std::string_view to_string(Role role);

/// Structured tool call as returned by native tool-calling models.
struct NativeCall
{
    std::string id;
    std::string name;
    nlohmann::json arguments = nlohmann::json::object();

    bool operator==(NativeCall const&) const = default;
};

struct Message
{
    Role role = Role::User;
    std::string content;
    std::vector<NativeCall> tool_calls; // assistant messages on the native path
    std::string tool_call_id;           // tool messages on the native path

    bool operator==(Message const&) const = default;
};

struct CompletionRequest
{
    std::vector<Message> messages; // first message is the system prompt
    nlohmann::json tool_signatures; // null on the text path
    double temperature = 0.0;
    int max_output_tokens = 1024;
};

struct CompletionResult
{
    std::optional<std::string> text;
    std::optional<std::vector<NativeCall>> native_calls;
    int output_tokens = 0;
    bool tokens_estimated = false;
};

/// Port through which the engine reaches the policy model. Implementations
/// must tolerate concurrent complete() calls.
class CompletionBackend
{
  public:
    virtual ~CompletionBackend() = default;

    /// Throws TransportError (retryable), ContractError or ScriptExhausted.
    virtual CompletionResult complete(CompletionRequest const& request) = 0;
};

/// Whitespace-separated token count, used when an endpoint reports no usage.
int estimate_output_tokens(std::string_view text);

/// Canonical JSON form of a request, the basis of its fingerprint.
nlohmann::json request_to_json(CompletionRequest const& request);
/// 16-hex-digit FNV-1a hash of the canonical request.
std::string request_fingerprint(CompletionRequest const& request);

/// One scripted backend response. An empty fingerprint matches by position.
struct FixtureEntry
{
    std::string fingerprint;
    std::optional<std::string> response_text;
    std::optional<std::vector<NativeCall>> native_calls;
    std::optional<int> output_tokens;
};

std::vector<FixtureEntry> parse_fixture(std::string_view jsonl);
std::vector<FixtureEntry> load_fixture_file(std::string const& path);
std::string serialize_fixture(std::vector<FixtureEntry> const& entries);

/// Replays fixture entries. A request takes the first unused entry with a
/// matching fingerprint, else the next unused positional entry.
class ScriptedBackend final: public CompletionBackend
{
  public:
    explicit ScriptedBackend(std::vector<FixtureEntry> entries);

    CompletionResult complete(CompletionRequest const& request) override;

    [[nodiscard]] std::size_t remaining() const;

  private:
    mutable std::mutex _mutex;
    std::vector<FixtureEntry> _entries;
    std::vector<bool> _used;
    std::size_t _nextPositional = 0;
};

/// Decorator capturing every exchange of a live session as fixture entries.
class RecordingBackend final: public CompletionBackend
{
  public:
    explicit RecordingBackend(CompletionBackend& inner);

    CompletionResult complete(CompletionRequest const& request) override;

    /// Fixture entries in completion order; replays byte-identically.
    [[nodiscard]] std::vector<FixtureEntry> fixture() const;

  private:
    CompletionBackend& _inner;
    mutable std::mutex _mutex;
    std::vector<FixtureEntry> _captured;
};

/// Builds a fixture from a session capture (fingerprint-keyed entries).
std::vector<FixtureEntry> record_and_replay(RecordingBackend const& session);

struct HttpBackendConfig
{
    std::string api_base; // e.g. https://host/v1
    std::string api_key;
    std::string model;
    std::chrono::seconds timeout { 120 };

    /// Reads REACTOD_API_BASE, REACTOD_API_KEY and REACTOD_MODEL.
    static std::optional<HttpBackendConfig> from_environment();
};

/// Chat-completions style HTTP endpoint.
class HttpBackend final: public CompletionBackend
{
  public:
    explicit HttpBackend(HttpBackendConfig config);

    CompletionResult complete(CompletionRequest const& request) override;

    /// Request body sent for `request` (exposed for wire-format tests).
    [[nodiscard]] nlohmann::json build_payload(CompletionRequest const& request) const;

  private:
    HttpBackendConfig _config;
};

/// Maps a chat-completions response body onto a CompletionResult.
/// Throws ContractError when the body does not have the expected shape.
CompletionResult parse_chat_completion(std::string_view body);

} // namespace reactod
