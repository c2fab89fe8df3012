// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "longalign/textnorm.hpp"

namespace longalign::corpus {

// One transcribed speech of the reference corpus. Sentence boundaries are code
// point offsets into text and may be absent.
struct Speech {
    std::string speech_id;
    std::string section_id;
    std::string date;
    std::string text;
    std::vector<textnorm::CharRange> sentences;
    nlohmann::json speaker = nlohmann::json::object();
};

// JSONL, one speech per line; blank lines are skipped. Throws ParseError.
std::vector<Speech> parse_jsonl(std::string_view text);
std::vector<Speech> read_jsonl(const std::string& path);

nlohmann::json to_json(const Speech& s);
std::string to_jsonl(const std::vector<Speech>& speeches);

}  // namespace longalign::corpus
