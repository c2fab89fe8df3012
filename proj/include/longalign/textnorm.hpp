// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace longalign::textnorm {

// Half-open range of code point offsets into the original text.
struct CharRange {
    std::size_t begin = 0;
    std::size_t end = 0;

    friend bool operator==(const CharRange&, const CharRange&) = default;
};

// Rules for turning transcript text into the form an acoustic model spells out.
struct NormConfig {
    std::set<char32_t> alphabet;
    std::set<char32_t> drop_chars;
    std::set<char32_t> space_chars;
    // Original token (exact match) to its spoken expansion, one entry per word.
    std::map<std::u32string, std::vector<std::u32string>> numeral_lexicon;

    // Throws ConfigError when the sets overlap, the alphabet lacks the space or an
    // expansion character, or a lexicon key would survive normalization unchanged.
    void validate() const;

    static NormConfig from_json(std::string_view json_text);
    static NormConfig load(const std::string& path);
    std::string to_json() const;

    // Lowercase Latin with Croatian and Polish diacritics plus Serbian Cyrillic,
    // common punctuation dropped and dashes/slashes treated as spaces.
    static NormConfig default_config();
};

struct NormalizedText {
    std::u32string norm;
    std::vector<CharRange> map;  // one entry per normalized character

    std::string utf8() const;
    // Whitespace-separated words of norm with their normalized character ranges.
    std::vector<std::pair<std::u32string, CharRange>> words() const;
};

// Throws UnmappableCharacter for a character the config cannot place.
NormalizedText normalize(std::string_view text, const NormConfig& config);
NormalizedText normalize(std::u32string_view text, const NormConfig& config);

// Smallest original interval covering normalized characters [norm_begin, norm_end).
CharRange project_span(const NormalizedText& nt, std::size_t norm_begin, std::size_t norm_end);

}  // namespace longalign::textnorm
