// SPDX-License-Identifier: Apache-2.0
#include <reactod/cli.hpp>
#include <reactod/datasets.hpp>
#include <reactod/errors.hpp>
#include <reactod/text.hpp>
#include <reactod/trace.hpp>

#include <fmt/format.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <istream>
#include <memory>
#include <ostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace reactod
{

// {{{ manifest

void RunManifest::check() const
{
    engine.check();
    if (concurrency < 1)
        throw InvalidArgument(fmt::format("concurrency must be >= 1, got {}", concurrency));
    if (limit < 0)
        throw InvalidArgument("limit must be >= 0");
    if (dataset != "multiwoz" && dataset != "sgd")
        throw InvalidArgument(fmt::format("unknown dataset '{}': expected multiwoz or sgd", dataset));
    if (backend != "scripted" && backend != "http")
        throw InvalidArgument(fmt::format("unknown backend '{}': expected scripted or http", backend));
    if (backend == "scripted" && fixture_path.empty())
        throw InvalidArgument("the scripted backend needs --fixture");
    if (schema_path.empty())
        throw InvalidArgument("--schema is required");
    if (dataset_path.empty())
        throw InvalidArgument("--data-path is required");
    if (output_dir.empty())
        throw InvalidArgument("--out is required");
    if (!(match.threshold > 0.0 && match.threshold <= 1.0))
        throw InvalidArgument("fuzzy threshold must be in (0, 1]");
}

ordered_json RunManifest::to_json() const
{
    auto backendJson = ordered_json { { "kind", backend } };
    if (backend == "scripted")
        backendJson["fixture"] = fixture_path;
    else if (auto const env = HttpBackendConfig::from_environment())
    {
        backendJson["api_base"] = env->api_base;
        backendJson["model"] = env->model;
    }
    return ordered_json {
        { "schema_path", schema_path },
        { "dataset", dataset },
        { "dataset_path", dataset_path },
        { "limit", limit },
        { "backend", std::move(backendJson) },
        { "engine",
          { { "mode", to_string(engine.mode) },
            { "style", to_string(engine.style) },
            { "k_max", engine.k_max },
            { "temperature", engine.temperature },
            { "max_output_tokens", engine.max_output_tokens },
            { "transport_retries", engine.transport_retries } } },
        { "match", { { "fuzzy", match.fuzzy }, { "threshold", match.threshold } } },
        { "output_dir", output_dir },
        { "concurrency", concurrency },
    };
}

ordered_json report_manifest(ordered_json const& manifest)
{
    auto out = manifest;
    if (out.is_object())
    {
        out.erase("output_dir");
        out.erase("concurrency");
    }
    return out;
}

MatchConfig match_from_manifest(ordered_json const& manifest)
{
    auto match = MatchConfig {};
    if (manifest.is_object() && manifest.contains("match") && manifest["match"].is_object())
    {
        auto const& m = manifest["match"];
        match.fuzzy = m.value("fuzzy", match.fuzzy);
        match.threshold = m.value("threshold", match.threshold);
    }
    return match;
}

// }}}
// {{{ eval

namespace
{
    void write_file(fs::path const& path, std::string const& content)
    {
        auto file = std::ofstream(path, std::ios::binary);
        if (!file)
            throw InvalidArgument(fmt::format("cannot write '{}'", path.string()));
        file << content;
        if (!file)
            throw InvalidArgument(fmt::format("failed writing '{}'", path.string()));
    }

    std::string read_text(std::string const& path)
    {
        auto in = std::ifstream(path, std::ios::binary);
        if (!in)
            throw ParseError(fmt::format("cannot open '{}'", path));
        auto buffer = std::stringstream {};
        buffer << in.rdbuf();
        return buffer.str();
    }

    std::vector<Dialogue> load_dataset(RunManifest const& m)
    {
        auto dialogues = m.dataset == "sgd" ? load_sgd(m.dataset_path) : load_multiwoz(m.dataset_path);
        if (m.limit > 0 && static_cast<std::size_t>(m.limit) < dialogues.size())
            dialogues.resize(static_cast<std::size_t>(m.limit));
        return dialogues;
    }

    void write_report_files(fs::path const& dir, EvalReport const& report)
    {
        write_file(dir / "report.json", serialize_report(report));
        write_file(dir / "report.txt", render_report_table(report));
    }
} // namespace

int cmd_eval(RunManifest const& manifest, std::ostream& out, std::ostream& err)
{
    auto schema = Schema {};
    auto entries = std::vector<FixtureEntry> {};
    auto http = std::optional<HttpBackendConfig> {};
    try
    {
        manifest.check();
        fs::create_directories(manifest.output_dir);
        schema = load_schema_file(manifest.schema_path);
        if (manifest.backend == "scripted")
        {
            entries = load_fixture_file(manifest.fixture_path);
            auto const positional = std::ranges::any_of(entries, [](auto const& e) { return e.fingerprint.empty(); });
            if (positional && manifest.concurrency > 1)
                throw InvalidArgument("positional fixture entries replay deterministically only with --concurrency 1");
        }
        else
        {
            http = HttpBackendConfig::from_environment();
            if (!http)
                throw InvalidArgument("the http backend needs REACTOD_API_BASE and REACTOD_MODEL");
        }
    }
    catch (Error const& e)
    {
        err << "configuration error: " << e.what() << "\n";
        return kExitConfig;
    }
    catch (fs::filesystem_error const& e)
    {
        err << "configuration error: " << e.what() << "\n";
        return kExitConfig;
    }

    auto dialogues = std::vector<Dialogue> {};
    try
    {
        dialogues = load_dataset(manifest);
    }
    catch (Error const& e)
    {
        err << "dataset error: " << e.what() << "\n";
        return kExitDataset;
    }

    auto base = std::unique_ptr<CompletionBackend> {};
    if (http)
        base = std::make_unique<HttpBackend>(*http);
    else
        base = std::make_unique<ScriptedBackend>(std::move(entries));
    auto recorder = std::optional<RecordingBackend> {};
    if (!manifest.record_path.empty())
        recorder.emplace(*base);
    CompletionBackend& backend = recorder ? static_cast<CompletionBackend&>(*recorder) : *base;

    // Workers fill per-dialogue slots; output is emitted in dialogue order.
    auto results = std::vector<std::optional<std::vector<TurnRecord>>>(dialogues.size());
    auto failures = std::vector<std::string>(dialogues.size());
    auto next = std::atomic<std::size_t> { 0 };
    auto const worker = [&] {
        for (auto i = next.fetch_add(1); i < dialogues.size(); i = next.fetch_add(1))
        {
            try
            {
                auto const run = run_dialogue(dialogues[i].turns, schema, backend, manifest.engine);
                results[i] = make_turn_records(run, dialogues[i].turns, schema, manifest.engine.mode);
            }
            catch (std::exception const& e)
            {
                failures[i] = e.what();
            }
        }
    };
    auto const workers = std::min<std::size_t>(static_cast<std::size_t>(manifest.concurrency), std::max<std::size_t>(dialogues.size(), 1));
    auto threads = std::vector<std::jthread> {};
    for (auto w = std::size_t { 1 }; w < workers; ++w)
        threads.emplace_back(worker);
    worker();
    threads.clear();

    auto records = std::vector<TurnRecord> {};
    auto traces = std::string {};
    auto failed = 0;
    for (auto i = std::size_t { 0 }; i < dialogues.size(); ++i)
    {
        if (!results[i])
        {
            ++failed;
            err << fmt::format("dialogue {} failed: {}\n", dialogues[i].id, failures[i]);
            continue;
        }
        for (auto& r: *results[i])
        {
            traces += serialize_turn_record(r);
            records.push_back(std::move(r));
        }
    }

    auto const manifestJson = manifest.to_json();
    auto report = build_report(records, manifest.match);
    report.manifest = report_manifest(manifestJson);

    try
    {
        auto const dir = fs::path(manifest.output_dir);
        write_file(dir / "traces.jsonl", traces);
        write_file(dir / "manifest.json", manifestJson.dump(2) + "\n");
        write_report_files(dir, report);
        if (recorder)
            write_file(manifest.record_path, serialize_fixture(record_and_replay(*recorder)));
    }
    catch (Error const& e)
    {
        err << "configuration error: " << e.what() << "\n";
        return kExitConfig;
    }

    out << render_report_table(report);
    if (failed > 0)
        out << fmt::format("{} of {} dialogues failed (see stderr)\n", failed, dialogues.size());
    return kExitOk;
}

// }}}
// {{{ report

int cmd_report(std::string const& traces_path,
               std::optional<std::string> const& manifest_path,
               std::optional<std::string> const& out_dir,
               std::ostream& out,
               std::ostream& err)
{
    auto records = std::vector<TurnRecord> {};
    auto manifest = ordered_json::object();
    try
    {
        records = load_traces_file(traces_path);
        auto path = manifest_path.value_or((fs::path(traces_path).parent_path() / "manifest.json").string());
        if (manifest_path || fs::exists(path))
        {
            try
            {
                manifest = ordered_json::parse(read_text(path));
            }
            catch (ordered_json::parse_error const& e)
            {
                throw ParseError(fmt::format("manifest '{}': {}", path, e.what()));
            }
        }
    }
    catch (Error const& e)
    {
        err << "input error: " << e.what() << "\n";
        return kExitDataset;
    }

    auto report = build_report(records, match_from_manifest(manifest));
    report.manifest = report_manifest(manifest);
    if (out_dir)
    {
        try
        {
            fs::create_directories(*out_dir);
            write_report_files(*out_dir, report);
        }
        catch (std::exception const& e)
        {
            err << "configuration error: " << e.what() << "\n";
            return kExitConfig;
        }
    }
    out << render_report_table(report);
    return kExitOk;
}

// }}}
// {{{ derive-schema

int cmd_derive_schema(std::string const& source,
                      std::string const& raw_path,
                      std::optional<std::string> const& annotations_path,
                      std::optional<std::string> const& out_path,
                      std::ostream& out,
                      std::ostream& err)
{
    try
    {
        auto schema = Schema {};
        if (source == "multiwoz")
        {
            if (!annotations_path)
                throw InvalidArgument("multiwoz derivation needs --annotations");
            schema = derive_multiwoz_schema(read_text(raw_path), load_type_annotations(read_text(*annotations_path)));
        }
        else if (source == "sgd")
            schema = derive_sgd_schema(read_text(raw_path));
        else
            throw InvalidArgument(fmt::format("unknown source '{}': expected multiwoz or sgd", source));

        auto const text = serialize_schema(schema);
        if (out_path)
            write_file(*out_path, text);
        else
            out << text;
        return kExitOk;
    }
    catch (InvalidArgument const& e)
    {
        err << "configuration error: " << e.what() << "\n";
        return kExitConfig;
    }
    catch (Error const& e)
    {
        err << "input error: " << e.what() << "\n";
        return kExitDataset;
    }
}

// }}}
// {{{ repl

namespace
{
    std::string first_line(std::string_view s)
    {
        return std::string(s.substr(0, s.find('\n')));
    }

    void print_state(BeliefState const& state, std::ostream& out)
    {
        if (state.empty())
        {
            out << "state: (empty)\n";
            return;
        }
        out << "state:\n";
        for (auto const& [slot, value]: state.entries)
            out << "  " << slot << " = " << value.norm << "\n";
    }

    void print_trace(AgentTrace const& trace, std::ostream& out)
    {
        auto index = 0;
        for (auto const& step: trace.steps)
        {
            ++index;
            if (step.call)
                out << fmt::format("step {}: {} {}\n", index, step.call->name, step.call->arguments.dump());
            else
                out << fmt::format("step {}: (unparsed) {}\n", index, step.parse_error.value_or(""));
            if (!step.thought.empty())
                out << "  thought: " << first_line(step.thought) << "\n";
            if (step.call && step.outcome.passed() && step.feedback.empty())
                out << "  validation: pass\n";
            for (auto const& v: step.outcome.violations())
                out << fmt::format("  violation {} ({}): {}\n", to_string(v.code), v.subject, v.message);
            out << "  observation: " << first_line(step.observation) << "\n";
        }
    }
} // namespace

int cmd_repl(Schema const& schema, CompletionBackend& backend, EngineConfig const& config, std::istream& in, std::ostream& out)
{
    auto state = BeliefState {};
    auto intents = std::vector<std::string> {};
    auto log = TurnLog {};

    auto line = std::string {};
    while (true)
    {
        out << "> " << std::flush;
        if (!std::getline(in, line))
            break;
        auto const input = std::string(text::trim(line));
        if (input.empty())
            continue;
        if (input == ":quit")
            break;
        if (input == ":state")
        {
            print_state(state, out);
            continue;
        }
        if (input == ":reset")
        {
            state = {};
            intents.clear();
            log.clear();
            out << "state reset\n";
            continue;
        }

        auto const ctx = TurnContext {
            .user_utterance = input,
            .prev_system_action = {},
            .prev_state = state,
            .prev_intents = intents,
            .dialogue_log = log,
            .turn_index = static_cast<int>(log.size()),
        };
        try
        {
            auto const outcome = run_turn(ctx, schema, backend, config);
            print_trace(outcome.trace, out);
            if (outcome.degraded)
                out << "degraded: state unchanged" << (outcome.trace.error ? " (" + *outcome.trace.error + ")" : std::string {}) << "\n";
            else if (outcome.committed)
                out << fmt::format("intent {}: {} slot(s) committed\n", outcome.intent, outcome.delta.changes.size());
            else
                out << fmt::format("intent {}: no state change\n", outcome.intent.empty() ? "(none)" : outcome.intent);
            state = outcome.new_state;
            if (outcome.committed && !outcome.delta.empty() && !outcome.intent.empty()
                && std::ranges::find(intents, outcome.intent) == intents.end())
                intents.push_back(outcome.intent);
            log.push_back(DialogueTurn { .user = input, .system = {} });
            print_state(state, out);
        }
        catch (std::exception const& e)
        {
            out << "error: " << e.what() << "\n";
        }
    }
    out << "\n";
    return kExitOk;
}

// }}}
// {{{ command line

namespace
{
    void add_engine_options(CLI::App& cmd, EngineConfig& engine, std::string& mode, std::string& style)
    {
        cmd.add_option("--mode", mode, "full | noloop | novalidator")->check(CLI::IsMember({ "full", "noloop", "novalidator" }));
        cmd.add_option("--k-max", engine.k_max, "Iteration cap per turn")->check(CLI::PositiveNumber);
        cmd.add_option("--style", style, "Calling style: text | native")->check(CLI::IsMember({ "text", "native" }));
        cmd.add_option("--temperature", engine.temperature, "Sampling temperature");
        cmd.add_option("--max-output-tokens", engine.max_output_tokens, "Output budget per call")->check(CLI::PositiveNumber);
    }

    void apply_engine_strings(EngineConfig& engine, std::string const& mode, std::string const& style)
    {
        engine.mode = mode_from_string(mode).value_or(EngineMode::FullLoop);
        engine.style = style_from_string(style).value_or(CallingStyle::Text);
    }
} // namespace

int run_cli(int argc, char const* const* argv, std::istream& in, std::ostream& out, std::ostream& err)
{
    auto app = CLI::App { "Tool-augmented dialogue state tracking with a validated ReAct loop", "reactod" };
    app.require_subcommand(1);

    auto manifest = RunManifest {};
    auto mode = std::string("full");
    auto style = std::string("text");
    auto noFuzzy = false;

    auto* eval = app.add_subcommand("eval", "Run a dataset through the engine and write traces and reports");
    eval->add_option("--schema", manifest.schema_path, "Schema file")->required();
    eval->add_option("--dataset", manifest.dataset, "multiwoz | sgd")->check(CLI::IsMember({ "multiwoz", "sgd" }));
    eval->add_option("--data-path", manifest.dataset_path, "Dataset directory")->required();
    eval->add_option("--backend", manifest.backend, "scripted | http")->check(CLI::IsMember({ "scripted", "http" }));
    eval->add_option("--fixture", manifest.fixture_path, "Replay fixture for the scripted backend");
    eval->add_option("--record", manifest.record_path, "Write a replay fixture of this run");
    eval->add_option("--concurrency", manifest.concurrency, "Dialogue workers")->check(CLI::PositiveNumber);
    eval->add_option("--out", manifest.output_dir, "Output directory")->required();
    eval->add_option("--limit", manifest.limit, "Evaluate only the first N dialogues")->check(CLI::NonNegativeNumber);
    eval->add_option("--fuzzy-threshold", manifest.match.threshold, "Minimum token-sort score for non-categorical slots");
    eval->add_flag("--no-fuzzy", noFuzzy, "Compare non-categorical slots exactly");
    add_engine_options(*eval, manifest.engine, mode, style);

    auto tracesPath = std::string {};
    auto reportManifest = std::optional<std::string> {};
    auto reportOut = std::optional<std::string> {};
    auto* report = app.add_subcommand("report", "Recompute the report from a traces file");
    report->add_option("traces", tracesPath, "traces.jsonl")->required();
    report->add_option("--manifest", reportManifest, "Manifest file (default: manifest.json next to the traces)");
    report->add_option("--out", reportOut, "Write report.json and report.txt here");

    auto source = std::string {};
    auto rawPath = std::string {};
    auto annotations = std::optional<std::string> {};
    auto deriveOut = std::optional<std::string> {};
    auto* derive = app.add_subcommand("derive-schema", "Derive a schema file from raw service definitions");
    derive->add_option("--source", source, "multiwoz | sgd")->required()->check(CLI::IsMember({ "multiwoz", "sgd" }));
    derive->add_option("--raw", rawPath, "MultiWOZ 2.2 schema.json or SGD schema.json")->required();
    derive->add_option("--annotations", annotations, "Slot type annotations (multiwoz)");
    derive->add_option("--out", deriveOut, "Output schema file (default: stdout)");

    auto replConfig = EngineConfig {};
    auto replSchema = std::string {};
    auto replBackend = std::string("scripted");
    auto replFixture = std::string {};
    auto replMode = std::string("full");
    auto replStyle = std::string("text");
    auto* repl = app.add_subcommand("repl", "Interactive turn-by-turn session");
    repl->add_option("--schema", replSchema, "Schema file")->required();
    repl->add_option("--backend", replBackend, "scripted | http")->check(CLI::IsMember({ "scripted", "http" }));
    repl->add_option("--fixture", replFixture, "Replay fixture for the scripted backend");
    add_engine_options(*repl, replConfig, replMode, replStyle);

    try
    {
        app.parse(argc, argv);
    }
    catch (CLI::ParseError const& e)
    {
        auto const code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitConfig;
    }

    if (eval->parsed())
    {
        apply_engine_strings(manifest.engine, mode, style);
        manifest.match.fuzzy = !noFuzzy;
        return cmd_eval(manifest, out, err);
    }
    if (report->parsed())
        return cmd_report(tracesPath, reportManifest, reportOut, out, err);
    if (derive->parsed())
        return cmd_derive_schema(source, rawPath, annotations, deriveOut, out, err);

    apply_engine_strings(replConfig, replMode, replStyle);
    try
    {
        replConfig.check();
        auto const schema = load_schema_file(replSchema);
        auto backend = std::unique_ptr<CompletionBackend> {};
        if (replBackend == "http")
        {
            auto const config = HttpBackendConfig::from_environment();
            if (!config)
                throw InvalidArgument("the http backend needs REACTOD_API_BASE and REACTOD_MODEL");
            backend = std::make_unique<HttpBackend>(*config);
        }
        else
        {
            if (replFixture.empty())
                throw InvalidArgument("the scripted backend needs --fixture");
            backend = std::make_unique<ScriptedBackend>(load_fixture_file(replFixture));
        }
        return cmd_repl(schema, *backend, replConfig, in, out);
    }
    catch (Error const& e)
    {
        err << "configuration error: " << e.what() << "\n";
        return kExitConfig;
    }
}

// }}}

} // namespace reactod
