#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace brandlens {

bool is_valid_utf8(std::string_view text);

// Number of code points; assumes valid UTF-8 (continuation bytes are skipped).
std::size_t utf8_length(std::string_view text);

// Byte offset of the code point with the given index, or text.size() when the
// index is past the end.
std::size_t utf8_offset(std::string_view text, std::size_t code_points);

bool is_ascii_space(char c);

// Collapses runs of whitespace to a single space and trims both ends.
std::string collapse_whitespace(std::string_view text);

std::string_view trim(std::string_view text);
std::string to_lower_ascii(std::string_view text);
bool iequals(std::string_view a, std::string_view b);
bool icontains(std::string_view haystack, std::string_view needle);
bool starts_with_icase(std::string_view text, std::string_view prefix);

std::vector<std::string> split_lines(std::string_view text);

}  // namespace brandlens
