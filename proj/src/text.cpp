// SPDX-License-Identifier: Apache-2.0
#include <reactod/text.hpp>

#include <algorithm>
#include <cctype>

namespace reactod::text
{

std::string to_lower(std::string_view s)
{
    auto out = std::string(s);
    std::ranges::transform(out, out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string_view trim(std::string_view s)
{
    auto const isSpace = [](unsigned char c) { return std::isspace(c) != 0; };
    while (!s.empty() && isSpace(s.front()))
        s.remove_prefix(1);
    while (!s.empty() && isSpace(s.back()))
        s.remove_suffix(1);
    return s;
}

std::string normalize_key(std::string_view s)
{
    return to_lower(trim(s));
}

std::string join(std::vector<std::string> const& parts, std::string_view sep)
{
    auto out = std::string {};
    for (auto i = std::size_t { 0 }; i < parts.size(); ++i)
    {
        if (i > 0)
            out += sep;
        out += parts[i];
    }
    return out;
}

std::vector<std::string> split_whitespace(std::string_view s)
{
    auto tokens = std::vector<std::string> {};
    auto current = std::string {};
    for (unsigned char c: s)
    {
        if (std::isspace(c))
        {
            if (!current.empty())
                tokens.push_back(std::move(current));
            current.clear();
        }
        else
            current.push_back(static_cast<char>(c));
    }
    if (!current.empty())
        tokens.push_back(std::move(current));
    return tokens;
}

bool starts_with_ci(std::string_view s, std::string_view prefix)
{
    if (s.size() < prefix.size())
        return false;
    return to_lower(s.substr(0, prefix.size())) == to_lower(prefix);
}

} // namespace reactod::text
