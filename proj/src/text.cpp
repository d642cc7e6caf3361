#include "gaapo/text.hpp"

#include <algorithm>
#include <cctype>

namespace gaapo::text {

namespace {
bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
char lower(char c) { return static_cast<char>(std::tolower(static_cast<unsigned char>(c))); }
}  // namespace

std::string_view trim(std::string_view s) {
    while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
    while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
    return s;
}

std::string to_lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), lower);
    return out;
}

std::string to_upper(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](char c) { return static_cast<char>(std::toupper(static_cast<unsigned char>(c))); });
    return out;
}

bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() &&
           std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) { return lower(x) == lower(y); });
}

std::vector<std::string_view> split_any(std::string_view s, std::string_view delimiters) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || delimiters.find(s[i]) != std::string_view::npos) {
            out.push_back(s.substr(start, i - start));
            start = i + 1;
        }
    }
    return out;
}

std::vector<Token> whitespace_tokens(std::string_view s) {
    std::vector<Token> tokens;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && is_space(s[i])) ++i;
        if (i == s.size()) break;
        const std::size_t begin = i;
        while (i < s.size() && !is_space(s[i])) ++i;
        tokens.push_back({begin, i});
    }
    return tokens;
}

std::size_t rfind_icase(std::string_view haystack, std::string_view needle) {
    if (needle.size() > haystack.size()) return std::string_view::npos;
    for (std::size_t i = haystack.size() - needle.size() + 1; i-- > 0;)
        if (iequals(haystack.substr(i, needle.size()), needle)) return i;
    return std::string_view::npos;
}

std::string strip_think_blocks(std::string_view s) {
    std::string out;
    constexpr std::string_view open = "<think>";
    constexpr std::string_view close = "</think>";
    std::size_t pos = 0;
    while (pos < s.size()) {
        const auto start = s.find(open, pos);
        if (start == std::string_view::npos) {
            out.append(s.substr(pos));
            break;
        }
        out.append(s.substr(pos, start - pos));
        const auto end = s.find(close, start);
        if (end == std::string_view::npos) break;  // unterminated: drop the rest
        pos = end + close.size();
    }
    return out;
}

bool is_word_char(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_'; }

bool contains_word(std::string_view haystack, std::string_view needle) {
    if (needle.empty() || needle.size() > haystack.size()) return false;
    for (std::size_t i = 0; i + needle.size() <= haystack.size(); ++i) {
        if (!iequals(haystack.substr(i, needle.size()), needle)) continue;
        const bool left_ok = i == 0 || !is_word_char(haystack[i - 1]);
        const std::size_t after = i + needle.size();
        const bool right_ok = after == haystack.size() || !is_word_char(haystack[after]);
        if (left_ok && right_ok) return true;
    }
    return false;
}

}  // namespace gaapo::text
