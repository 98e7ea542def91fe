// SPDX-License-Identifier: Apache-2.0
#include <reactod/engine.hpp>
#include <reactod/errors.hpp>
#include <reactod/text.hpp>
#include <reactod/validator.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <sstream>
#include <thread>

using json = nlohmann::json;

namespace reactod
{

std::string_view to_string(EngineMode mode)
{
    switch (mode)
    {
        case EngineMode::FullLoop: return "full";
        case EngineMode::NoLoop: return "noloop";
        case EngineMode::LoopNoValidator: return "novalidator";
    }
    return "full";
}

std::optional<EngineMode> mode_from_string(std::string_view s)
{
    for (auto const m: { EngineMode::FullLoop, EngineMode::NoLoop, EngineMode::LoopNoValidator })
        if (to_string(m) == s)
            return m;
    return std::nullopt;
}

std::string_view to_string(CallingStyle style)
{
    return style == CallingStyle::Text ? "text" : "native";
}

std::optional<CallingStyle> style_from_string(std::string_view s)
{
    if (s == "text")
        return CallingStyle::Text;
    if (s == "native")
        return CallingStyle::Native;
    return std::nullopt;
}

void EngineConfig::check() const
{
    if (k_max < 1)
        throw InvalidArgument(fmt::format("k_max must be >= 1, got {}", k_max));
    if (transport_retries < 0)
        throw InvalidArgument("transport_retries must be >= 0");
}

// {{{ prompts

json tool_signatures()
{
    auto const function = [](std::string_view name, std::string_view description, json parameters) {
        return json { { "type", "function" },
                      { "function", { { "name", name }, { "description", description }, { "parameters", std::move(parameters) } } } };
    };
    auto const extraction = json {
        { "type", "object" },
        { "properties",
          { { "slot", { { "type", "string" } } }, { "raw", { { "type", "string" } } }, { "norm", { { "type", "string" } } } } },
        { "required", { "slot", "raw", "norm" } },
    };
    return json::array({
        function(kIntentClassifyName,
                 "Select the intent of the current user utterance. Returns the slot definitions of the intent.",
                 { { "type", "object" }, { "properties", { { "intent", { { "type", "string" } } } } }, { "required", { "intent" } } }),
        function(kSlotResolveName,
                 "Submit the slot values newly mentioned or changed in this turn. Ends the turn when accepted.",
                 { { "type", "object" },
                   { "properties", { { "extractions", { { "type", "array" }, { "items", extraction } } } } },
                   { "required", { "extractions" } } }),
        function(kHistoryRetrieveName,
                 "Return the last n turns of the conversation.",
                 { { "type", "object" },
                   { "properties", { { "n", { { "type", "integer" }, { "minimum", 1 } } } } },
                   { "required", { "n" } } }),
    });
}

std::string build_system_prompt(Schema const& schema, CallingStyle style)
{
    auto out = std::ostringstream {};
    out << "You are the language understanding component of a task-oriented dialogue system.\n"
           "You track the user's goal for the current turn by calling tools. You never reply to the user.\n"
           "\n"
           "Protocol:\n"
           "1. Call intent_classify with the intent of the current user utterance.\n"
           "2. Then call slot_resolve with every slot value the user newly mentions or changes in this turn.\n"
           "   For each slot give raw (the words used in the dialogue) and norm (the value in the slot's format).\n"
           "   Report only new or changed slots; the current belief state is kept.\n"
           "   Use \""
        << kNullSentinel
        << "\" as norm to remove a slot the user takes back.\n"
           "   If the user accepts a value offered in the previous system utterance, use that value.\n"
           "3. If a value refers to an entity named earlier (for example \"the restaurant\"), call history_retrieve\n"
           "   to read earlier turns before resolving it.\n"
           "If a call is rejected, read the error and correct the call.\n"
           "For greetings, thanks and out-of-domain turns use the intent "
        << schema.fallback_intent_id
        << "; the turn ends there.\n"
           "\n"
           "Intents:\n";
    for (auto const& intent: schema.intents)
        out << "- " << intent.id << ": " << (intent.description.empty() ? "no description" : intent.description) << "\n";

    out << "\n"
           "Tools:\n"
           "- intent_classify {\"intent\": \"<intent id>\"}: select the intent; returns its slot definitions.\n"
           "- slot_resolve {\"extractions\": [{\"slot\": \"<slot id>\", \"raw\": \"<surface form>\", \"norm\": \"<normalized value>\"}]}:"
           " submit this turn's slot values; ends the turn when accepted.\n"
           "- history_retrieve {\"n\": <integer >= 1>}: return the last n turns of the conversation.\n"
           "\n";
    if (style == CallingStyle::Text)
        out << "Answer with exactly one step in this format:\n"
               "Thought: <your reasoning>\n"
               "Action: <tool name>\n"
               "Action Input: <JSON object on one line>\n";
    else
        out << "Call exactly one tool per step.\n";
    return out.str();
}

std::string build_turn_message(TurnContext const& ctx)
{
    auto out = std::ostringstream {};
    out << "Previous system utterance: " << (ctx.prev_system_action.empty() ? "(none)" : ctx.prev_system_action) << "\n";
    out << "Previous intents: " << (ctx.prev_intents.empty() ? std::string("(none)") : text::join(ctx.prev_intents, ", ")) << "\n";
    if (ctx.prev_state.empty())
        out << "state: (empty)\n";
    else
    {
        out << "state:\n";
        for (auto const& [slot, value]: ctx.prev_state.entries)
            out << "- " << slot << ": " << value.norm << "\n";
    }
    out << "User utterance: " << ctx.user_utterance;
    return out.str();
}

// }}}
// {{{ step parsing

namespace
{
    std::string strip_decoration(std::string_view s)
    {
        s = text::trim(s);
        while (!s.empty() && (s.front() == '`' || s.front() == '"' || s.front() == '\'' || s.front() == '*'))
            s.remove_prefix(1);
        while (!s.empty() && (s.back() == '`' || s.back() == '"' || s.back() == '\'' || s.back() == '*'))
            s.remove_suffix(1);
        return std::string(text::trim(s));
    }

    std::vector<std::string_view> split_lines(std::string_view s)
    {
        auto lines = std::vector<std::string_view> {};
        while (true)
        {
            auto const pos = s.find('\n');
            lines.push_back(s.substr(0, pos));
            if (pos == std::string_view::npos)
                break;
            s.remove_prefix(pos + 1);
        }
        return lines;
    }
} // namespace

ParsedStep parse_agent_step(CompletionResult const& raw)
{
    if (raw.native_calls && !raw.native_calls->empty())
    {
        auto const& native = raw.native_calls->front();
        return ParsedStep { .thought = std::string(text::trim(raw.text.value_or(""))),
                            .call = ToolCall::make(native.name, native.arguments) };
    }

    auto const body = raw.text.value_or("");
    auto const lines = split_lines(body);

    auto actionLine = std::optional<std::size_t> {};
    auto inputLine = std::optional<std::size_t> {};
    for (auto i = std::size_t { 0 }; i < lines.size(); ++i)
    {
        auto const line = text::trim(lines[i]);
        if (!actionLine && text::starts_with_ci(line, "Action:"))
            actionLine = i;
        else if (actionLine && !inputLine && text::starts_with_ci(line, "Action Input:"))
            inputLine = i;
    }
    if (!actionLine)
        throw ParseFailure("no 'Action:' line in agent output");
    if (!inputLine)
        throw ParseFailure("no 'Action Input:' line after 'Action:'");

    auto thought = std::string {};
    for (auto i = std::size_t { 0 }; i < *actionLine; ++i)
    {
        auto line = text::trim(lines[i]);
        if (text::starts_with_ci(line, "Thought:"))
            line.remove_prefix(8);
        if (!thought.empty())
            thought += "\n";
        thought += text::trim(line);
    }

    auto const name = strip_decoration(text::trim(lines[*actionLine]).substr(7));
    if (name.empty())
        throw ParseFailure("empty tool name after 'Action:'");

    auto const inputText = std::string(text::trim(text::trim(lines[*inputLine]).substr(13)));
    auto arguments = json::parse(inputText, nullptr, false);
    if (arguments.is_discarded())
    {
        // Tolerate an object spread over the following lines.
        auto joined = inputText;
        for (auto i = *inputLine + 1; i < lines.size() && !text::starts_with_ci(text::trim(lines[i]), "Observation:"); ++i)
            joined += "\n" + std::string(lines[i]);
        arguments = json::parse(joined, nullptr, false);
    }
    if (arguments.is_discarded() || !arguments.is_object())
        throw ParseFailure("'Action Input:' is not a JSON object");

    return ParsedStep { .thought = std::move(thought), .call = ToolCall::make(name, std::move(arguments)) };
}

// }}}
// {{{ turn execution

namespace
{
    CompletionResult complete_with_retries(CompletionBackend& backend, CompletionRequest const& request, EngineConfig const& config)
    {
        auto backoff = config.retry_backoff;
        for (auto attempt = 0;; ++attempt)
        {
            try
            {
                return backend.complete(request);
            }
            catch (TransportError const&)
            {
                if (attempt >= config.transport_retries)
                    throw;
            }
            if (backoff.count() > 0)
                std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }
    }

    class TurnRunner
    {
      public:
        TurnRunner(TurnContext const& ctx, Schema const& schema, CompletionBackend& backend, EngineConfig const& config):
            _ctx(ctx), _schema(schema), _backend(backend), _config(config)
        {
            _outcome.new_state = ctx.prev_state;
        }

        TurnOutcome run()
        {
            try
            {
                if (_config.mode == EngineMode::NoLoop)
                    run_no_loop();
                else
                    run_loop();
            }
            catch (ScriptExhausted const&)
            {
                throw;
            }
            catch (BackendError const& e)
            {
                _outcome.trace.error = e.what();
                degrade();
            }
            return std::move(_outcome);
        }

      private:
        CompletionRequest request(std::vector<Message> messages) const
        {
            return CompletionRequest {
                .messages = std::move(messages),
                .tool_signatures = _config.style == CallingStyle::Native ? tool_signatures() : json(nullptr),
                .temperature = _config.temperature,
                .max_output_tokens = _config.max_output_tokens,
            };
        }

        CompletionResult call_backend(std::vector<Message> const& messages)
        {
            auto result = complete_with_retries(_backend, request(messages), _config);
            ++_outcome.llm_calls;
            _outcome.output_tokens += result.output_tokens;
            return result;
        }

        void degrade()
        {
            _outcome.degraded = true;
            _outcome.committed = false;
            _outcome.delta = {};
            _outcome.new_state = _ctx.prev_state;
            _outcome.intent = _outcome.trace.active_intent().value_or("");
        }

        ToolResult execute(ToolCall const& call) const
        {
            if (!call.tool)
                throw InvalidArgument(fmt::format("unknown tool {}", call.name));
            switch (*call.tool)
            {
                case ToolId::IntentClassify: return execute_intent_classify(call.arguments, _schema);
                case ToolId::SlotResolve:
                    return execute_slot_resolve(call.arguments, _outcome.trace.active_intent().value_or(""), _schema);
                case ToolId::HistoryRetrieve: return execute_history_retrieve(call.arguments, _ctx.dialogue_log);
            }
            throw InternalFault("unreachable tool id");
        }

        void commit(SlotCandidates const& candidates)
        {
            _outcome.delta = candidates_to_update(candidates, _schema, _ctx.turn_index);
            _outcome.new_state = apply_update(_ctx.prev_state, _outcome.delta, _ctx.turn_index);
            _outcome.committed = true;
            _outcome.intent = _outcome.trace.active_intent().value_or("");
        }

        Message assistant_message(CompletionResult const& result, std::optional<ToolCall> const& call, int step) const
        {
            auto message = Message { .role = Role::Assistant, .content = result.text.value_or(""), .tool_calls = {}, .tool_call_id = {} };
            if (_config.style == CallingStyle::Native && call && result.native_calls && !result.native_calls->empty())
            {
                auto native = result.native_calls->front();
                if (native.id.empty())
                    native.id = fmt::format("call_{}", step);
                message.tool_calls.push_back(std::move(native));
            }
            return message;
        }

        static Message observation_message(Message const& assistant, std::string const& observation)
        {
            if (!assistant.tool_calls.empty())
                return Message { .role = Role::Tool, .content = observation, .tool_calls = {}, .tool_call_id = assistant.tool_calls.front().id };
            return Message { .role = Role::User, .content = "Observation: " + observation, .tool_calls = {}, .tool_call_id = {} };
        }

        void run_loop()
        {
            auto messages = std::vector<Message> {
                { .role = Role::System, .content = build_system_prompt(_schema, _config.style), .tool_calls = {}, .tool_call_id = {} },
                { .role = Role::User, .content = build_turn_message(_ctx), .tool_calls = {}, .tool_call_id = {} },
            };

            for (auto k = 0; k < _config.k_max; ++k)
            {
                auto const result = call_backend(messages);
                auto step = TraceStep {};
                step.output_tokens = result.output_tokens;
                step.tokens_estimated = result.tokens_estimated;

                auto parsed = std::optional<ParsedStep> {};
                try
                {
                    parsed = parse_agent_step(result);
                }
                catch (ParseFailure const& e)
                {
                    step.parse_error = e.what();
                    step.feedback = std::string(kParseFailureFeedback);
                    step.observation = step.feedback;
                    auto const assistant = assistant_message(result, std::nullopt, k);
                    messages.push_back(assistant);
                    messages.push_back(observation_message(assistant, step.observation));
                    _outcome.trace.steps.push_back(std::move(step));
                    continue;
                }

                parsed->call.step_index = k;
                step.thought = parsed->thought;
                step.call = parsed->call;
                auto const assistant = assistant_message(result, parsed->call, k);
                messages.push_back(assistant);

                if (_config.mode == EngineMode::FullLoop)
                {
                    step.outcome = validate(parsed->call, _outcome.trace, _schema);
                    if (!step.outcome.passed())
                    {
                        step.feedback = render_feedback(step.outcome);
                        step.observation = "validation failed:\n" + step.feedback;
                        messages.push_back(observation_message(assistant, step.observation));
                        _outcome.trace.steps.push_back(std::move(step));
                        continue;
                    }
                }

                auto toolResult = std::optional<ToolResult> {};
                try
                {
                    toolResult = execute(parsed->call);
                }
                catch (Error const& e)
                {
                    // Only reachable with the validator disabled.
                    step.observation = fmt::format("error: {}", e.what());
                    messages.push_back(observation_message(assistant, step.observation));
                    _outcome.trace.steps.push_back(std::move(step));
                    continue;
                }

                step.observation = render_observation(*toolResult);
                step.result = *toolResult;
                _outcome.trace.steps.push_back(std::move(step));

                if (auto const* shortCircuit = std::get_if<ShortCircuit>(&*toolResult))
                {
                    _outcome.intent = shortCircuit->intent_id;
                    return;
                }
                if (auto const* candidates = std::get_if<SlotCandidates>(&*toolResult))
                {
                    commit(*candidates);
                    return;
                }
                messages.push_back(observation_message(assistant, _outcome.trace.steps.back().observation));
            }
            degrade();
        }

        // Two independent calls. Nothing is fed back; a rejected call is dropped.
        void run_no_loop()
        {
            auto const systemPrompt = build_system_prompt(_schema, _config.style);
            auto const turnMessage = build_turn_message(_ctx);

            auto const single = [&](std::string const& instruction, ToolId expected, int index) {
                auto const messages = std::vector<Message> {
                    { .role = Role::System, .content = systemPrompt, .tool_calls = {}, .tool_call_id = {} },
                    { .role = Role::User, .content = turnMessage + "\n\n" + instruction, .tool_calls = {}, .tool_call_id = {} },
                };
                auto const result = call_backend(messages);
                auto step = TraceStep {};
                step.output_tokens = result.output_tokens;
                step.tokens_estimated = result.tokens_estimated;
                try
                {
                    auto parsed = parse_agent_step(result);
                    parsed.call.step_index = index;
                    step.thought = parsed.thought;
                    step.call = parsed.call;
                    step.outcome = validate(parsed.call, _outcome.trace, _schema);
                    if (step.outcome.passed() && parsed.call.tool == expected)
                    {
                        step.result = execute(parsed.call);
                        step.observation = render_observation(*step.result);
                    }
                    else if (step.outcome.passed())
                        step.observation = fmt::format("ignored: expected a {} call", tool_name(expected));
                    else
                        step.observation = "rejected";
                }
                catch (ParseFailure const& e)
                {
                    step.parse_error = e.what();
                    step.observation = "rejected";
                }
                _outcome.trace.steps.push_back(std::move(step));
                return _outcome.trace.steps.back().result;
            };

            auto const icResult = single("Call intent_classify now.", ToolId::IntentClassify, 0);

            auto instruction = std::string {};
            if (icResult && std::holds_alternative<IntentAccepted>(*icResult))
            {
                auto const& accepted = std::get<IntentAccepted>(*icResult);
                instruction = fmt::format("Active intent: {}. Slot definitions:\n{}\nCall slot_resolve now.",
                                          accepted.intent_id,
                                          accepted.slot_defs_rendered);
            }
            else
                instruction = "No transactional intent is active. Call slot_resolve now.";

            auto const srResult = single(instruction, ToolId::SlotResolve, 1);

            if (icResult)
                if (auto const* shortCircuit = std::get_if<ShortCircuit>(&*icResult))
                    _outcome.intent = shortCircuit->intent_id;
            if (srResult)
                if (auto const* candidates = std::get_if<SlotCandidates>(&*srResult))
                    commit(*candidates);
        }

        TurnContext const& _ctx;
        Schema const& _schema;
        CompletionBackend& _backend;
        EngineConfig const& _config;
        TurnOutcome _outcome;
    };
} // namespace

TurnOutcome run_turn(TurnContext const& ctx, Schema const& schema, CompletionBackend& backend, EngineConfig const& config)
{
    config.check();
    return TurnRunner(ctx, schema, backend, config).run();
}

DialogueResult run_dialogue(std::vector<GoldTurn> const& dialogue,
                            Schema const& schema,
                            CompletionBackend& backend,
                            EngineConfig const& config)
{
    auto result = DialogueResult {};
    if (!dialogue.empty())
        result.dialogue_id = dialogue.front().dialogue_id;

    auto state = BeliefState {};
    auto intents = std::vector<std::string> {};
    auto log = TurnLog {};

    for (auto t = std::size_t { 0 }; t < dialogue.size(); ++t)
    {
        auto const& gold = dialogue[t];
        auto const ctx = TurnContext {
            .user_utterance = gold.user_utterance,
            .prev_system_action = t > 0 ? dialogue[t - 1].system_utterance : std::string {},
            .prev_state = state,
            .prev_intents = intents,
            .dialogue_log = log,
            .turn_index = static_cast<int>(t),
        };
        auto outcome = run_turn(ctx, schema, backend, config);
        state = outcome.new_state;
        if (outcome.committed && !outcome.delta.empty() && !outcome.intent.empty()
            && std::ranges::find(intents, outcome.intent) == intents.end())
            intents.push_back(outcome.intent);
        log.push_back(DialogueTurn { .user = gold.user_utterance, .system = gold.system_utterance });
        result.predicted.push_back(state);
        result.turns.push_back(std::move(outcome));
    }
    return result;
}

// }}}

} // namespace reactod
