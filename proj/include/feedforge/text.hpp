#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace feedforge::text {

// Decodes UTF-8 into code points. Malformed sequences decode to U+FFFD, one per bad byte.
std::u32string decode_utf8(std::string_view bytes);
void append_utf8(std::string& out, char32_t cp);

// Unicode White_Space property.
bool is_space(char32_t cp);

// Tokens separated by runs of Unicode whitespace.
std::vector<std::string_view> split_whitespace(std::string_view s);
std::size_t count_tokens(std::string_view s);

std::string_view trim(std::string_view s);

bool starts_with_icase(std::string_view s, std::string_view prefix);
std::string to_lower_ascii(std::string_view s);

} // namespace feedforge::text
