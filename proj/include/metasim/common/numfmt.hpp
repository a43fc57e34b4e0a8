#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace metasim {

/// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double value);

/// Strict full-string parse; accepts "inf", "-inf", "nan".
std::optional<double> parse_double(std::string_view text);
std::optional<long long> parse_int(std::string_view text);

std::string_view trim(std::string_view text);

}  // namespace metasim
