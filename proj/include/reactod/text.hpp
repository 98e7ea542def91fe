// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace reactod::text
{

std::string to_lower(std::string_view s);
std::string_view trim(std::string_view s);
std::string normalize_key(std::string_view s); // trim + lowercase

std::string join(std::vector<std::string> const& parts, std::string_view sep);
std::vector<std::string> split_whitespace(std::string_view s);

bool starts_with_ci(std::string_view s, std::string_view prefix);

} // namespace reactod::text
