#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace gaapo::text {

std::string_view trim(std::string_view s);
std::string to_lower(std::string_view s);
std::string to_upper(std::string_view s);
bool iequals(std::string_view a, std::string_view b);

/// Splits on any of the delimiter characters; empty pieces are kept.
std::vector<std::string_view> split_any(std::string_view s, std::string_view delimiters);

/// Whitespace-separated tokens with their [begin, end) offsets.
struct Token {
    std::size_t begin = 0;
    std::size_t end = 0;
};
std::vector<Token> whitespace_tokens(std::string_view s);

/// Position of the last case-insensitive occurrence of needle, or npos.
std::size_t rfind_icase(std::string_view haystack, std::string_view needle);

/// Removes <think>...</think> sections emitted by reasoning models.
std::string strip_think_blocks(std::string_view s);

bool is_word_char(char c);

/// Occurrences of needle in haystack that are not flanked by word characters.
/// Case-insensitive.
bool contains_word(std::string_view haystack, std::string_view needle);

}  // namespace gaapo::text
