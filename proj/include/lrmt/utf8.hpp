#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace lrmt::utf8 {

// Strict decoding: overlong forms, surrogates and truncated sequences throw
// Error(EncodingError).
std::u32string decode(std::string_view text);
std::string encode(std::u32string_view text);
std::string encode(char32_t cp);

bool is_valid(std::string_view text);

// Splits into code points, each returned as its own UTF-8 string.
std::vector<std::string> chars(std::string_view text);

// Unicode White_Space property (the set Python's str.split() uses).
bool is_space(char32_t cp);
bool is_alpha(char32_t cp);

std::vector<std::string> split_whitespace(std::string_view text);
std::string trim(std::string_view text);

std::string nfc(std::string_view text);
std::string lowercase(std::string_view text);

}  // namespace lrmt::utf8
