// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <reactod/backend.hpp>
#include <reactod/engine.hpp>
#include <reactod/metrics.hpp>
#include <reactod/schema.hpp>

#include <iosfwd>
#include <optional>
#include <string>

#include <json.hpp>

namespace reactod
{

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitDataset = 3;

/// Everything an evaluation run depends on.
struct RunManifest
{
    std::string schema_path;
    std::string dataset = "multiwoz"; // multiwoz | sgd
    std::string dataset_path;
    std::string backend = "scripted"; // scripted | http
    std::string fixture_path;         // scripted backend
    std::string record_path;          // optional: capture a replay fixture here
    EngineConfig engine;
    MatchConfig match;
    std::string output_dir;
    int concurrency = 1;
    int limit = 0; // first N dialogues only; 0 = all

    /// Throws InvalidArgument on an inconsistent manifest.
    void check() const;

    [[nodiscard]] nlohmann::ordered_json to_json() const;
};

/// The manifest fields that can change results. Execution details such as
/// the output directory and worker count are left out so reports from
/// equivalent runs compare byte for byte.
nlohmann::ordered_json report_manifest(nlohmann::ordered_json const& manifest);

/// Reads match settings back from a manifest document; defaults when absent.
MatchConfig match_from_manifest(nlohmann::ordered_json const& manifest);

/// Runs every dialogue and writes traces.jsonl, manifest.json, report.json
/// and report.txt into output_dir. Returns an exit status.
int cmd_eval(RunManifest const& manifest, std::ostream& out, std::ostream& err);

/// Recomputes a report from a traces file. The manifest defaults to a
/// manifest.json next to the traces. Writes report.json / report.txt when
/// out_dir is given.
int cmd_report(std::string const& traces_path,
               std::optional<std::string> const& manifest_path,
               std::optional<std::string> const& out_dir,
               std::ostream& out,
               std::ostream& err);

/// Writes a schema file derived from raw MultiWOZ 2.2 or SGD service definitions.
int cmd_derive_schema(std::string const& source,
                      std::string const& raw_path,
                      std::optional<std::string> const& annotations_path,
                      std::optional<std::string> const& out_path,
                      std::ostream& out,
                      std::ostream& err);

/// Line-oriented session: one user utterance per line, ":state", ":reset", ":quit".
int cmd_repl(Schema const& schema, CompletionBackend& backend, EngineConfig const& config, std::istream& in, std::ostream& out);

/// Full command-line entry point.
int run_cli(int argc, char const* const* argv, std::istream& in, std::ostream& out, std::ostream& err);

} // namespace reactod
