// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>

namespace longalign::unicode {

// Decodes UTF-8 into scalar values. Throws FormatError on malformed input.
std::u32string decode(std::string_view utf8);

std::string encode(std::u32string_view text);
std::string encode(char32_t c);

// Simple one-to-one lowercasing (Latin, Latin-1, Latin Extended-A, Greek, Cyrillic).
// Locale independent; characters without a mapping are returned unchanged.
char32_t to_lower(char32_t c);
bool is_upper(char32_t c);

bool is_space(char32_t c);

// Number of scalar values in a UTF-8 string.
std::size_t length(std::string_view utf8);

}  // namespace longalign::unicode
