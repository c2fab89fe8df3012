// SPDX-License-Identifier: Apache-2.0
#include "longalign/filters.hpp"

#include <algorithm>
#include <cmath>

#include "longalign/unicode.hpp"

namespace longalign::filters {

bool keep_speech(double cer, double max_cer) { return cer < max_cer; }

bool keep_sentence_cer(double cer, double max_cer) { return cer <= max_cer; }

bool keep_sentence_ratio(double duration_ms, std::size_t chars, double max_ratio) {
    if (chars == 0) return false;
    return duration_ms / 1000.0 / static_cast<double>(chars) <= max_ratio;
}

const std::set<std::u32string>& default_abbreviations() {
    static const std::set<std::u32string> abbreviations{U"dr", U"mr", U"mrs", U"ms", U"prof", U"npr", U"tj",
                                                        U"itd", U"sl", U"br", U"sv", U"god", U"gđa", U"gđica",
                                                        U"g", U"st", U"vs"};
    return abbreviations;
}

namespace {

bool is_terminal(char32_t c) { return c == U'.' || c == U'!' || c == U'?'; }

bool after_abbreviation(const std::u32string& u, std::size_t period) {
    std::size_t b = period;
    while (b > 0 && !unicode::is_space(u[b - 1]) && !is_terminal(u[b - 1])) --b;
    std::u32string word;
    for (std::size_t i = b; i < period; ++i) word.push_back(unicode::to_lower(u[i]));
    return default_abbreviations().count(word) > 0;
}

}  // namespace

std::vector<textnorm::CharRange> split_sentences(std::string_view text,
                                                 std::span<const textnorm::CharRange> boundaries) {
    if (!boundaries.empty()) return {boundaries.begin(), boundaries.end()};
    const auto u = unicode::decode(text);
    std::vector<textnorm::CharRange> out;
    auto emit = [&](std::size_t b, std::size_t e) {
        while (b < e && unicode::is_space(u[b])) ++b;
        while (e > b && unicode::is_space(u[e - 1])) --e;
        if (e > b) out.push_back({b, e});
    };
    std::size_t start = 0;
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (!is_terminal(u[i])) continue;
        std::size_t k = i + 1;
        while (k < u.size() && unicode::is_space(u[k])) ++k;
        if (k == i + 1 || k >= u.size() || !unicode::is_upper(u[k])) continue;
        if (u[i] == U'.' && after_abbreviation(u, i)) continue;
        emit(start, i + 1);
        start = k;
    }
    emit(start, u.size());
    return out;
}

std::vector<RetainedSpeech> filter_speeches(std::span<const postproc::FileRecord> records, double max_cer) {
    std::vector<RetainedSpeech> out;
    for (const auto& r : records) {
        for (const auto& e : r.entries) {
            const auto* a = std::get_if<postproc::AlignedSpeech>(&e);
            if (a && keep_speech(a->cer, max_cer)) out.push_back({r.audio_id, *a});
        }
    }
    return out;
}

std::vector<SentenceRecord> build_sentences(const RetainedSpeech& rs) {
    const auto& sp = rs.speech;
    const auto original = unicode::decode(sp.text);
    std::vector<SentenceRecord> out;
    for (std::size_t k = 0; k < sp.sentences.size(); ++k) {
        const auto& sa = sp.sentences[k];
        SentenceRecord s;
        for (const auto& w : sp.words) {
            if (w.char_start < sa.range.begin || w.char_end > sa.range.end) continue;
            auto rel = w;
            rel.char_start -= sa.range.begin;
            rel.char_end -= sa.range.begin;
            s.words.push_back(std::move(rel));
        }
        if (s.words.empty()) continue;
        s.id = sp.speech_id + ".s" + std::to_string(k);
        s.speech_id = sp.speech_id;
        s.audio = rs.audio_id + ".flac";
        s.text = unicode::encode(std::u32string_view(original).substr(sa.range.begin, sa.range.end - sa.range.begin));
        s.duration_ms = s.words.back().end_ms - s.words.front().start_ms;
        s.cer = sa.cer;
        s.speaker = sp.speaker;
        s.asr_tokens = sa.asr_tokens;
        out.push_back(std::move(s));
    }
    return out;
}

std::vector<SentenceRecord> filter_sentence_cer(std::vector<SentenceRecord> sentences, double max_cer) {
    std::erase_if(sentences, [&](const SentenceRecord& s) { return !keep_sentence_cer(s.cer, max_cer); });
    return sentences;
}

std::vector<SentenceRecord> filter_sentence_ratio(std::vector<SentenceRecord> sentences, double max_ratio) {
    std::erase_if(sentences, [&](const SentenceRecord& s) {
        return !keep_sentence_ratio(s.duration_ms, unicode::length(s.text), max_ratio);
    });
    return sentences;
}

nlohmann::json to_json(const SentenceRecord& s) {
    auto words = nlohmann::json::array();
    for (const auto& w : s.words) {
        words.push_back(
            {{"w", w.word}, {"cs", w.char_start}, {"ce", w.char_end}, {"ms_s", w.start_ms}, {"ms_e", w.end_ms}});
    }
    return {{"id", s.id},     {"speech_id", s.speech_id}, {"audio", s.audio},    {"text", s.text},
            {"words", words}, {"cer", s.cer},             {"speaker", s.speaker}};
}

SentenceRecord sentence_from_json(const nlohmann::json& j) {
    SentenceRecord s;
    s.id = j.at("id");
    s.speech_id = j.at("speech_id");
    s.audio = j.at("audio");
    s.text = j.at("text");
    s.cer = j.at("cer");
    s.speaker = j.value("speaker", nlohmann::json::object());
    for (const auto& w : j.at("words")) {
        s.words.push_back({w.at("w"), w.at("cs"), w.at("ce"), w.at("ms_s"), w.at("ms_e")});
    }
    if (!s.words.empty()) s.duration_ms = s.words.back().end_ms - s.words.front().start_ms;
    return s;
}

std::string to_jsonl(std::span<const SentenceRecord> sentences) {
    std::string out;
    for (const auto& s : sentences) {
        out += to_json(s).dump();
        out.push_back('\n');
    }
    return out;
}

std::vector<Chunk> resegment(const SentenceRecord& sentence, double min_s, double max_s) {
    const auto& w = sentence.words;
    std::vector<Chunk> out;
    if (w.empty()) return out;
    const double max_ms = max_s * 1000.0;
    const double total = w.back().end_ms - w.front().start_ms;
    auto close = [&](std::size_t b, std::size_t e) {
        Chunk c;
        c.sentence_id = sentence.id;
        c.index = out.size();
        c.word_begin = b;
        c.word_end = e;
        c.start_ms = w[b].start_ms;
        c.end_ms = w[e - 1].end_ms;
        c.oversize = e - b == 1 && c.end_ms - c.start_ms > max_ms;
        out.push_back(std::move(c));
    };
    if (total <= max_ms || w.size() == 1) {
        close(0, w.size());
        return out;
    }
    const double pieces = std::ceil(total / max_ms);
    const double target = std::max(min_s * 1000.0, total / pieces);
    std::size_t b = 0;
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (i > b && w[i].end_ms - w[b].start_ms > max_ms) {
            close(b, i);
            b = i;
        }
        if (w[i].end_ms - w[b].start_ms >= target) {
            close(b, i + 1);
            b = i + 1;
        }
    }
    if (b < w.size()) close(b, w.size());
    return out;
}

nlohmann::json to_json(const Chunk& c) {
    return {{"sentence_id", c.sentence_id}, {"index", c.index},   {"word_begin", c.word_begin},
            {"word_end", c.word_end},       {"start_ms", c.start_ms}, {"end_ms", c.end_ms},
            {"oversize", c.oversize}};
}

DatasetStats dataset_stats(std::span<const SentenceRecord> sentences) {
    DatasetStats st;
    std::vector<double> durations;
    for (const auto& s : sentences) {
        st.size_bytes += to_json(s).dump().size() + 1;
        st.duration_h += s.duration_ms / 3.6e6;
        st.words += s.words.size();
        st.characters += unicode::length(s.text);
        durations.push_back(s.duration_ms / 1000.0);
    }
    st.sentences = sentences.size();
    if (!durations.empty()) {
        std::sort(durations.begin(), durations.end());
        const std::size_t n = durations.size();
        st.median_sentence_s = n % 2 ? durations[n / 2] : (durations[n / 2 - 1] + durations[n / 2]) / 2.0;
    }
    return st;
}

nlohmann::json to_json(const DatasetStats& s) {
    return {{"size_bytes", s.size_bytes}, {"duration_h", s.duration_h}, {"sentences", s.sentences},
            {"words", s.words},           {"characters", s.characters}, {"median_sentence_s", s.median_sentence_s}};
}

double yield_rate(std::span<const postproc::FileRecord> records, std::span<const SentenceRecord> retained) {
    std::size_t total = 0, kept = 0;
    for (const auto& r : records) total += r.asr_tokens;
    for (const auto& s : retained) kept += s.asr_tokens;
    return total == 0 ? 0.0 : static_cast<double>(kept) / static_cast<double>(total);
}

std::vector<SentenceRecord> run_filters(std::span<const postproc::FileRecord> records, const Thresholds& t) {
    std::vector<SentenceRecord> sentences;
    for (const auto& rs : filter_speeches(records, t.speech_cer)) {
        auto built = build_sentences(rs);
        sentences.insert(sentences.end(), std::make_move_iterator(built.begin()), std::make_move_iterator(built.end()));
    }
    return filter_sentence_ratio(filter_sentence_cer(std::move(sentences), t.sentence_cer), t.ratio);
}

}  // namespace longalign::filters
