// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "longalign/postproc.hpp"
#include "longalign/textnorm.hpp"

namespace longalign::filters {

struct Thresholds {
    double speech_cer = 0.60;    // speeches at or above are dropped
    double sentence_cer = 0.10;  // sentences above are dropped
    double ratio = 0.2;          // seconds per character; sentences above are dropped
};

bool keep_speech(double cer, double max_cer);
bool keep_sentence_cer(double cer, double max_cer);
bool keep_sentence_ratio(double duration_ms, std::size_t chars, double max_ratio);

// Lowercase abbreviations whose trailing period does not end a sentence.
const std::set<std::u32string>& default_abbreviations();

// Corpus boundaries when given, otherwise splits after . ! ? followed by
// whitespace and an uppercase letter (not after a known abbreviation).
// Fallback sentences are trimmed of surrounding whitespace.
std::vector<textnorm::CharRange> split_sentences(std::string_view text,
                                                 std::span<const textnorm::CharRange> boundaries = {});

struct RetainedSpeech {
    std::string audio_id;
    postproc::AlignedSpeech speech;
};

std::vector<RetainedSpeech> filter_speeches(std::span<const postproc::FileRecord> records, double max_cer = 0.60);

struct SentenceRecord {
    std::string id;
    std::string speech_id;
    std::string audio;
    std::string text;
    std::vector<postproc::WordAlignment> words;  // char offsets relative to text
    double duration_ms = 0.0;
    double cer = 0.0;
    nlohmann::json speaker = nlohmann::json::object();
    std::size_t asr_tokens = 0;  // ASR words behind the sentence, not serialized
};

// Sentences of a speech that carry at least one aligned word. Ids are
// "<speech_id>.s<k>" with k counting every sentence of the speech from 0.
std::vector<SentenceRecord> build_sentences(const RetainedSpeech& speech);

std::vector<SentenceRecord> filter_sentence_cer(std::vector<SentenceRecord> sentences, double max_cer = 0.10);
std::vector<SentenceRecord> filter_sentence_ratio(std::vector<SentenceRecord> sentences, double max_ratio = 0.2);

nlohmann::json to_json(const SentenceRecord& s);
SentenceRecord sentence_from_json(const nlohmann::json& j);
std::string to_jsonl(std::span<const SentenceRecord> sentences);

struct Chunk {
    std::string sentence_id;
    std::size_t index = 0;
    std::size_t word_begin = 0;
    std::size_t word_end = 0;
    double start_ms = 0.0;
    double end_ms = 0.0;
    bool oversize = false;  // a single word longer than the maximum

    double duration_s() const { return (end_ms - start_ms) / 1000.0; }
};

// Splits a sentence into playback chunks of whole words, aiming for even
// chunks no longer than max_s and closing a chunk once it reaches the target.
std::vector<Chunk> resegment(const SentenceRecord& sentence, double min_s = 3.0, double max_s = 6.0);
nlohmann::json to_json(const Chunk& c);

struct DatasetStats {
    std::size_t size_bytes = 0;  // serialized JSONL
    double duration_h = 0.0;
    std::size_t sentences = 0;
    std::size_t words = 0;
    std::size_t characters = 0;
    double median_sentence_s = 0.0;
};

DatasetStats dataset_stats(std::span<const SentenceRecord> sentences);
nlohmann::json to_json(const DatasetStats& s);

// ASR words behind retained sentences over all ASR words of the files.
double yield_rate(std::span<const postproc::FileRecord> records, std::span<const SentenceRecord> retained);

// The full filtering chain in its fixed order.
std::vector<SentenceRecord> run_filters(std::span<const postproc::FileRecord> records, const Thresholds& t);

}  // namespace longalign::filters
