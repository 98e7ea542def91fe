// SPDX-License-Identifier: Apache-2.0
#include <reactod/datasets.hpp>
#include <reactod/errors.hpp>
#include <reactod/schema.hpp>
#include <reactod/text.hpp>
#include <reactod/validator.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

using json = nlohmann::json;
namespace fs = std::filesystem;

namespace reactod
{

namespace
{
    std::string read_file(fs::path const& path)
    {
        auto in = std::ifstream(path, std::ios::binary);
        if (!in)
            throw ParseError(fmt::format("cannot open '{}'", path.string()));
        auto buffer = std::stringstream {};
        buffer << in.rdbuf();
        return buffer.str();
    }

    json parse_document(std::string_view text, std::string_view what)
    {
        try
        {
            return json::parse(text);
        }
        catch (json::parse_error const& e)
        {
            throw ParseError(fmt::format("{}: {}", what, e.what()));
        }
    }

    std::string string_field(json const& j, char const* key, std::string_view where)
    {
        auto const it = j.find(key);
        if (it == j.end() || !it->is_string())
            throw ParseError(fmt::format("{}: missing string field '{}'", where, key));
        return it->get<std::string>();
    }
} // namespace

// {{{ MultiWOZ 2.1

std::string normalize_multiwoz_value(std::string_view value)
{
    auto v = text::normalize_key(value);
    if (v.empty() || v == "not mentioned" || v == "none")
        return {};
    if (v == "dont care" || v == "don't care" || v == "do n't care" || v == "do nt care" || v == "dontcare" || v == "doesn't care")
        return std::string(kDontCare);
    // "9:15" -> "09:15"
    if (v.size() == 4 && std::isdigit(static_cast<unsigned char>(v[0])) && v[1] == ':'
        && std::isdigit(static_cast<unsigned char>(v[2])) && std::isdigit(static_cast<unsigned char>(v[3])))
        v.insert(v.begin(), '0');
    return v;
}

std::string multiwoz_slot_id(std::string_view domain, std::string_view key, bool book)
{
    return text::to_lower(domain) + "-" + (book ? "book" : "") + text::to_lower(key);
}

std::vector<Dialogue> parse_multiwoz(std::string_view data_json, std::string_view test_list)
{
    auto const data = parse_document(data_json, "multiwoz data");
    if (!data.is_object())
        throw ParseError("multiwoz data: top-level value must be an object keyed by dialogue id");

    auto ids = std::vector<std::string> {};
    auto listStream = std::istringstream(std::string(test_list));
    for (auto line = std::string {}; std::getline(listStream, line);)
        if (auto const id = text::trim(line); !id.empty())
            ids.emplace_back(id);

    auto dialogues = std::vector<Dialogue> {};
    dialogues.reserve(ids.size());
    for (auto const& id: ids)
    {
        auto const it = data.find(id);
        if (it == data.end())
            throw ParseError(fmt::format("multiwoz data: test dialogue '{}' not found", id));
        auto const log = it->find("log");
        if (log == it->end() || !log->is_array())
            throw ParseError(fmt::format("multiwoz dialogue '{}': missing 'log' array", id));

        auto dialogue = Dialogue { .id = id, .turns = {} };
        for (auto i = std::size_t { 0 }; i + 1 < log->size(); i += 2)
        {
            auto const where = fmt::format("multiwoz dialogue '{}' log entry {}", id, i);
            auto const& user = (*log)[i];
            auto const& system = (*log)[i + 1];
            auto turn = GoldTurn {};
            turn.dialogue_id = id;
            turn.turn = static_cast<int>(i / 2);
            turn.user_utterance = string_field(user, "text", where);
            turn.system_utterance = string_field(system, "text", where);

            auto const metadata = system.find("metadata");
            if (metadata == system.end() || !metadata->is_object())
                throw ParseError(fmt::format("{}: system entry has no metadata", where));

            for (auto const& domain: kMultiwozDomains)
            {
                auto const d = metadata->find(domain);
                if (d == metadata->end() || !d->is_object())
                    continue;
                auto domainActive = false;
                for (auto const book: { false, true })
                {
                    auto const part = d->find(book ? "book" : "semi");
                    if (part == d->end() || !part->is_object())
                        continue;
                    for (auto const& [key, value]: part->items())
                    {
                        if (!value.is_string())
                            continue; // "booked" lists
                        auto norm = normalize_multiwoz_value(value.get<std::string>());
                        if (norm.empty())
                            continue;
                        turn.gold_state.entries[multiwoz_slot_id(domain, key, book)] =
                            SlotValue { .raw = value.get<std::string>(), .norm = std::move(norm), .source_turn = turn.turn };
                        domainActive = true;
                    }
                }
                if (domainActive)
                    turn.active_domains.push_back(domain);
            }
            turn.gold_state.turn_index = turn.turn;
            dialogue.turns.push_back(std::move(turn));
        }
        dialogues.push_back(std::move(dialogue));
    }
    return dialogues;
}

std::vector<Dialogue> load_multiwoz(std::string const& path)
{
    auto const dir = fs::path(path);
    auto const list = dir / "testListFile.txt";
    if (!fs::exists(list))
        throw SplitListMissing(fmt::format("test split list '{}' not found", list.string()));
    auto const data = dir / "data.json";
    if (!fs::exists(data))
        throw ParseError(fmt::format("'{}' not found", data.string()));
    return parse_multiwoz(read_file(data), read_file(list));
}

// }}}
// {{{ SGD

std::vector<Dialogue> parse_sgd(std::string_view schema_json, std::vector<std::string> const& dialogue_files)
{
    auto const schema = parse_document(schema_json, "sgd schema");
    if (!schema.is_array())
        throw ParseError("sgd schema: top-level value must be an array of services");
    auto declared = std::set<std::string> {};
    for (auto const& service: schema)
        declared.insert(string_field(service, "service_name", "sgd schema"));

    auto const requireService = [&](std::string const& service, std::string_view dialogueId) {
        if (!declared.contains(service))
            throw ParseError(fmt::format("sgd dialogue '{}': service '{}' is not declared in the schema", dialogueId, service));
    };

    auto dialogues = std::vector<Dialogue> {};
    for (auto fileIndex = std::size_t { 0 }; fileIndex < dialogue_files.size(); ++fileIndex)
    {
        auto const doc = parse_document(dialogue_files[fileIndex], fmt::format("sgd dialogue file {}", fileIndex));
        if (!doc.is_array())
            throw ParseError(fmt::format("sgd dialogue file {}: expected an array of dialogues", fileIndex));

        for (auto const& jd: doc)
        {
            auto const id = string_field(jd, "dialogue_id", "sgd dialogue");
            for (auto const& service: jd.value("services", std::vector<std::string> {}))
                requireService(service, id);

            auto const turns = jd.find("turns");
            if (turns == jd.end() || !turns->is_array())
                throw ParseError(fmt::format("sgd dialogue '{}': missing 'turns' array", id));

            auto dialogue = Dialogue { .id = id, .turns = {} };
            // Latest cumulative state per service; a service keeps its state while inactive.
            auto perService = std::map<std::string, std::map<std::string, std::vector<std::string>>> {};

            for (auto i = std::size_t { 0 }; i < turns->size(); ++i)
            {
                auto const& jt = (*turns)[i];
                auto const where = fmt::format("sgd dialogue '{}' turn {}", id, i);
                if (string_field(jt, "speaker", where) != "USER")
                    continue;

                auto turn = GoldTurn {};
                turn.dialogue_id = id;
                turn.turn = static_cast<int>(dialogue.turns.size());
                turn.user_utterance = string_field(jt, "utterance", where);
                for (auto j = i + 1; j < turns->size(); ++j)
                    if ((*turns)[j].value("speaker", "") == "SYSTEM")
                    {
                        turn.system_utterance = string_field((*turns)[j], "utterance", where);
                        break;
                    }

                for (auto const& frame: jt.value("frames", json::array()))
                {
                    auto const service = string_field(frame, "service", where);
                    requireService(service, id);
                    auto const key = text::to_lower(service);
                    if (std::ranges::find(turn.active_domains, key) == turn.active_domains.end())
                        turn.active_domains.push_back(key);
                    if (!turn.service)
                        turn.service = key;
                    auto const state = frame.find("state");
                    if (state == frame.end() || !state->is_object())
                        continue;
                    auto& slots = perService[key];
                    slots.clear();
                    auto const slotValues = state->value("slot_values", json::object());
                    for (auto const& [slot, values]: slotValues.items())
                    {
                        if (!values.is_array() || values.empty())
                            throw ParseError(fmt::format("{}: slot '{}' needs a non-empty value list", where, slot));
                        slots[text::to_lower(slot)] = values.get<std::vector<std::string>>();
                    }
                }

                for (auto const& [service, slots]: perService)
                    for (auto const& [slot, values]: slots)
                    {
                        auto const slotId = service + "-" + slot;
                        turn.gold_state.entries[slotId] = SlotValue { .raw = values.front(), .norm = values.front(), .source_turn = turn.turn };
                        if (values.size() > 1)
                            turn.alternatives[slotId] = values;
                    }
                turn.gold_state.turn_index = turn.turn;
                dialogue.turns.push_back(std::move(turn));
            }
            dialogues.push_back(std::move(dialogue));
        }
    }
    return dialogues;
}

std::vector<Dialogue> load_sgd(std::string const& dir)
{
    auto root = fs::path(dir);
    if (!fs::exists(root / "schema.json") && fs::exists(root / "test" / "schema.json"))
        root /= "test";
    if (!fs::exists(root / "schema.json"))
        throw ParseError(fmt::format("'{}' not found", (root / "schema.json").string()));

    auto files = std::vector<fs::path> {};
    for (auto const& entry: fs::directory_iterator(root))
    {
        auto const name = entry.path().filename().string();
        if (entry.is_regular_file() && name.starts_with("dialogues_") && name.ends_with(".json"))
            files.push_back(entry.path());
    }
    if (files.empty())
        throw ParseError(fmt::format("no dialogues_*.json files in '{}'", root.string()));
    std::ranges::sort(files);

    auto contents = std::vector<std::string> {};
    contents.reserve(files.size());
    for (auto const& f: files)
        contents.push_back(read_file(f));
    return parse_sgd(read_file(root / "schema.json"), contents);
}

// }}}

} // namespace reactod
