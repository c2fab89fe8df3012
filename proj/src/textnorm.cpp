// SPDX-License-Identifier: Apache-2.0
#include "longalign/textnorm.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "longalign/errors.hpp"
#include "longalign/unicode.hpp"

namespace longalign::textnorm {

namespace {

using json = nlohmann::json;

std::set<char32_t> to_set(std::string_view utf8) {
    const auto cps = unicode::decode(utf8);
    return {cps.begin(), cps.end()};
}

std::string from_set(const std::set<char32_t>& s) {
    return unicode::encode(std::u32string(s.begin(), s.end()));
}

struct Emitted {
    char32_t c;
    CharRange range;
};

using NormWord = std::vector<Emitted>;

std::string describe(char32_t c) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "U+%04X", static_cast<unsigned>(c));
    return "character '" + unicode::encode(c) + "' (" + buf + ")";
}

}  // namespace

void NormConfig::validate() const {
    if (!alphabet.contains(U' ')) throw ConfigError("alphabet must contain the space character");
    for (char32_t c : drop_chars) {
        if (alphabet.contains(c)) throw ConfigError("character '" + unicode::encode(c) + "' is both in alphabet and drop");
        if (space_chars.contains(c)) throw ConfigError("character '" + unicode::encode(c) + "' is both in drop and space");
    }
    for (char32_t c : space_chars) {
        if (alphabet.contains(c)) throw ConfigError("character '" + unicode::encode(c) + "' is both in alphabet and space");
    }
    for (const auto& [key, expansion] : numeral_lexicon) {
        if (key.empty()) throw ConfigError("empty lexicon key");
        const bool survives = std::all_of(key.begin(), key.end(), [&](char32_t c) {
            return c != U' ' && alphabet.contains(c) && unicode::to_lower(c) == c;
        });
        if (survives) throw ConfigError("lexicon key '" + unicode::encode(key) + "' is already normalized text");
        if (expansion.empty()) throw ConfigError("lexicon key '" + unicode::encode(key) + "' has no expansion");
        for (const auto& word : expansion) {
            if (word.empty()) throw ConfigError("empty expansion word for '" + unicode::encode(key) + "'");
            for (char32_t c : word) {
                if (c == U' ' || !alphabet.contains(c)) {
                    throw ConfigError("expansion of '" + unicode::encode(key) + "' uses '" + unicode::encode(c) +
                                      "' outside the alphabet");
                }
            }
        }
    }
}

NormConfig NormConfig::from_json(std::string_view json_text) {
    json j;
    try {
        j = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("norm config: ") + e.what());
    }
    NormConfig cfg;
    cfg.alphabet = to_set(j.value("alphabet", std::string{}));
    cfg.drop_chars = to_set(j.value("drop", std::string{}));
    cfg.space_chars = to_set(j.value("space", std::string{}));
    if (j.contains("lexicon")) {
        for (const auto& [key, value] : j.at("lexicon").items()) {
            std::vector<std::u32string> words;
            for (const auto& w : value) words.push_back(unicode::decode(w.get<std::string>()));
            cfg.numeral_lexicon.emplace(unicode::decode(key), std::move(words));
        }
    }
    cfg.validate();
    return cfg;
}

NormConfig NormConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open norm config " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_json(ss.str());
}

std::string NormConfig::to_json() const {
    json j;
    j["alphabet"] = from_set(alphabet);
    j["drop"] = from_set(drop_chars);
    j["space"] = from_set(space_chars);
    json lex = json::object();
    for (const auto& [key, words] : numeral_lexicon) {
        json arr = json::array();
        for (const auto& w : words) arr.push_back(unicode::encode(w));
        lex[unicode::encode(key)] = std::move(arr);
    }
    j["lexicon"] = std::move(lex);
    return j.dump();
}

NormConfig NormConfig::default_config() {
    NormConfig cfg;
    cfg.alphabet = to_set(
        " abcdefghijklmnopqrstuvwxyz"
        "čćđšž"
        "ąęłńóśźż"
        "абвгдђежзијклљмнњопрстћуфхцчџш");
    cfg.drop_chars = to_set(".,!?;:\"'()[]{}«»„“”‘’‚…*");
    cfg.space_chars = to_set("-–—/");
    return cfg;
}

std::string NormalizedText::utf8() const { return unicode::encode(norm); }

std::vector<std::pair<std::u32string, CharRange>> NormalizedText::words() const {
    std::vector<std::pair<std::u32string, CharRange>> out;
    std::size_t i = 0;
    while (i < norm.size()) {
        if (norm[i] == U' ') {
            ++i;
            continue;
        }
        const std::size_t start = i;
        while (i < norm.size() && norm[i] != U' ') ++i;
        out.emplace_back(norm.substr(start, i - start), CharRange{start, i});
    }
    return out;
}

NormalizedText normalize(std::string_view text, const NormConfig& config) {
    return normalize(std::u32string_view(unicode::decode(text)), config);
}

NormalizedText normalize(std::u32string_view text, const NormConfig& config) {
    auto is_separator = [&](char32_t c) { return unicode::is_space(c) || config.space_chars.contains(c); };

    std::vector<NormWord> words;
    auto expand = [&](const std::vector<std::u32string>& expansion, CharRange range) {
        for (const auto& w : expansion) {
            NormWord nw;
            for (char32_t c : w) nw.push_back({c, range});
            words.push_back(std::move(nw));
        }
    };

    std::size_t i = 0;
    while (i < text.size()) {
        if (is_separator(text[i])) {
            ++i;
            continue;
        }
        const std::size_t begin = i;
        while (i < text.size() && !is_separator(text[i])) ++i;
        const std::size_t end = i;
        const std::u32string token(text.substr(begin, end - begin));

        if (auto it = config.numeral_lexicon.find(token); it != config.numeral_lexicon.end()) {
            expand(it->second, {begin, end});
            continue;
        }
        std::size_t core_begin = begin;
        std::size_t core_end = end;
        while (core_begin < core_end && config.drop_chars.contains(text[core_begin])) ++core_begin;
        while (core_end > core_begin && config.drop_chars.contains(text[core_end - 1])) --core_end;
        if (core_begin < core_end && (core_begin != begin || core_end != end)) {
            const std::u32string core(text.substr(core_begin, core_end - core_begin));
            if (auto it = config.numeral_lexicon.find(core); it != config.numeral_lexicon.end()) {
                expand(it->second, {core_begin, core_end});
                continue;
            }
        }

        NormWord nw;
        for (std::size_t k = begin; k < end; ++k) {
            const char32_t c = text[k];
            if (config.drop_chars.contains(c)) continue;
            const char32_t lc = unicode::to_lower(c);
            if (!config.alphabet.contains(lc)) {
                throw UnmappableCharacter(describe(c) + " at offset " + std::to_string(k) +
                                          " is not covered by the norm config");
            }
            nw.push_back({lc, {k, k + 1}});
        }
        if (!nw.empty()) words.push_back(std::move(nw));
    }

    NormalizedText out;
    for (const auto& w : words) {
        if (!out.norm.empty()) {
            const std::size_t prev_end = out.map.back().end;
            const CharRange next = w.front().range;
            out.norm.push_back(U' ');
            out.map.push_back(prev_end < next.begin ? CharRange{prev_end, next.begin} : next);
        }
        for (const auto& e : w) {
            out.norm.push_back(e.c);
            out.map.push_back(e.range);
        }
    }
    return out;
}

CharRange project_span(const NormalizedText& nt, std::size_t norm_begin, std::size_t norm_end) {
    if (norm_begin >= norm_end || norm_end > nt.norm.size()) {
        throw RangeError("normalized span [" + std::to_string(norm_begin) + ", " + std::to_string(norm_end) +
                         ") is invalid for text of length " + std::to_string(nt.norm.size()));
    }
    CharRange out{nt.map[norm_begin].begin, nt.map[norm_begin].end};
    for (std::size_t k = norm_begin; k < norm_end; ++k) {
        out.begin = std::min(out.begin, nt.map[k].begin);
        out.end = std::max(out.end, nt.map[k].end);
    }
    return out;
}

}  // namespace longalign::textnorm
