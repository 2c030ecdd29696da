#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace occ {

/// Decodes UTF-8 into codepoints. Invalid byte sequences decode to U+FFFD.
std::vector<char32_t> decode_utf8(std::string_view text);

std::string encode_utf8(const std::vector<char32_t>& codepoints);
void append_utf8(std::string& out, char32_t cp);

/// Lowercases ASCII A-Z and the Latin-1 uppercase range (U+00C0..U+00DE,
/// excluding the multiplication sign). Everything else passes through.
char32_t simple_lower(char32_t cp);

bool is_space(char32_t cp);

}  // namespace occ
