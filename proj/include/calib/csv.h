#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace calib::csv
{

/// Splits one RFC 4180 record. Fields may be double-quoted; "" inside quotes is a literal quote.
/// Throws ParseError on an unterminated quote.
std::vector<std::string> split_line(std::string_view line, std::size_t line_number = 0);

/// Quotes a field only when it contains a comma, quote, or line break.
std::string quote(std::string_view field);

/// Shortest decimal text that parses back to the identical double. Locale independent.
std::string format_double(double value);

/// Strict locale-independent parse of a whole field; accepts inf/nan spellings.
double parse_double(std::string_view text, std::size_t line_number = 0);

} // namespace calib::csv
