#pragma once

#include <cstddef>
#include <string>
#include <string_view>

namespace csk::utf8 {

// Decodes UTF-8 into code points. Invalid byte sequences become U+FFFD,
// consuming one byte at a time, so decoding never fails.
std::u32string decode(std::string_view text);

std::string encode(std::u32string_view code_points);

void append(std::string& out, char32_t cp);

// Number of code points in a UTF-8 string.
std::size_t length(std::string_view text);

}  // namespace csk::utf8
