// SPDX-License-Identifier: Apache-2.0
#include "longalign/corpus.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "longalign/errors.hpp"
#include "longalign/unicode.hpp"

namespace longalign::corpus {

namespace {

Speech speech_from_json(const nlohmann::json& j, std::size_t line) {
    Speech s;
    s.speech_id = j.at("speech_id").get<std::string>();
    s.section_id = j.at("section_id").get<std::string>();
    s.date = j.value("date", std::string());
    s.text = j.at("text").get<std::string>();
    if (auto it = j.find("speaker"); it != j.end() && !it->is_null()) {
        if (!it->is_object()) throw ParseError(line, "speaker must be an object");
        s.speaker = *it;
    }
    const std::size_t len = unicode::length(s.text);
    std::size_t prev_end = 0;
    if (auto it = j.find("sentences"); it != j.end() && !it->is_null()) {
        for (const auto& b : *it) {
            if (!b.is_array() || b.size() != 2) throw ParseError(line, "sentence boundary must be [start, end]");
            textnorm::CharRange r{b[0].get<std::size_t>(), b[1].get<std::size_t>()};
            if (r.begin >= r.end || r.end > len || r.begin < prev_end) {
                throw ParseError(line, "sentence boundaries must be ordered, non-empty and inside the text");
            }
            prev_end = r.end;
            s.sentences.push_back(r);
        }
    }
    if (s.speech_id.empty()) throw ParseError(line, "empty speech_id");
    return s;
}

}  // namespace

std::vector<Speech> parse_jsonl(std::string_view text) {
    std::vector<Speech> out;
    std::set<std::string> seen;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        const auto line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        try {
            out.push_back(speech_from_json(nlohmann::json::parse(line), line_no));
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(line_no, std::string("bad corpus record: ") + e.what());
        }
        if (!seen.insert(out.back().speech_id).second) {
            throw ParseError(line_no, "duplicate speech_id '" + out.back().speech_id + "'");
        }
    }
    return out;
}

std::vector<Speech> read_jsonl(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open corpus file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_jsonl(ss.str());
}

nlohmann::json to_json(const Speech& s) {
    auto sentences = nlohmann::json::array();
    for (const auto& r : s.sentences) sentences.push_back({r.begin, r.end});
    return {{"speech_id", s.speech_id}, {"section_id", s.section_id}, {"date", s.date},
            {"text", s.text},           {"sentences", sentences},    {"speaker", s.speaker}};
}

std::string to_jsonl(const std::vector<Speech>& speeches) {
    std::string out;
    for (const auto& s : speeches) {
        out += to_json(s).dump();
        out.push_back('\n');
    }
    return out;
}

}  // namespace longalign::corpus
