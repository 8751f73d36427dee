#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace selfcrowd::text {

/// Shortest decimal that round-trips to the same double.
std::string format_double(double v);

std::vector<std::string_view> split(std::string_view line, char sep);

std::string_view trim(std::string_view s);

/// Strict parses: the whole (trimmed) field must be consumed.
bool parse_int(std::string_view s, long long& out);
bool parse_double(std::string_view s, double& out);

}  // namespace selfcrowd::text
