#pragma once

#include <string>
#include <string_view>

namespace xaiopt::unicode {

// Decodes UTF-8 into scalar values; throws InputError on malformed input.
std::u32string decode(std::string_view utf8);
std::string encode(std::u32string_view text);
std::string encode(char32_t c);

bool is_space(char32_t c);
bool is_punct(char32_t c);

} // namespace xaiopt::unicode
