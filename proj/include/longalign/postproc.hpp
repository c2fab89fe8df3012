// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "longalign/align.hpp"
#include "longalign/corpus.hpp"
#include "longalign/ctc.hpp"
#include "longalign/matcher.hpp"
#include "longalign/textnorm.hpp"

namespace longalign::postproc {

// Edit distance over code points (cer) or tokens (wer) divided by the reference
// length. An empty reference yields the hypothesis length, so any non-empty
// hypothesis scores at least 1.
double cer(std::string_view ref, std::string_view hyp);
double wer(std::span<const std::string> ref, std::span<const std::string> hyp);

// One original-text word with its code point range in the speech text and its audio extent.
struct WordAlignment {
    std::string word;
    std::size_t char_start = 0;
    std::size_t char_end = 0;
    double start_ms = 0.0;
    double end_ms = 0.0;

    friend bool operator==(const WordAlignment&, const WordAlignment&) = default;
};

struct SentenceAlignment {
    textnorm::CharRange range;  // in the speech text
    std::string asr;            // ASR words attributed to the sentence through the match scripts
    std::size_t asr_tokens = 0;
    double cer = 0.0;           // normalized sentence text against asr
    bool covered = false;       // every normalized word was aligned to audio
};

struct UnmatchedAsr {
    std::string text;
    double start_ms = 0.0;
    double end_ms = 0.0;
    std::size_t asr_begin = 0;
    std::size_t asr_end = 0;
};

struct UnalignedSpeech {
    std::string speech_id;
    std::string text;
};

struct AlignedSpeech {
    std::string speech_id;
    std::string text;
    std::string asr_text;
    std::size_t asr_tokens = 0;
    std::vector<WordAlignment> words;
    std::vector<SentenceAlignment> sentences;
    double cer = 0.0;
    double wer = 0.0;
    nlohmann::json speaker = nlohmann::json::object();
};

using Entry = std::variant<UnmatchedAsr, UnalignedSpeech, AlignedSpeech>;

struct FileRecord {
    std::string audio_id;
    std::size_t asr_tokens = 0;
    std::vector<Entry> entries;
};

// Word stream of the speeches paired with one file, in corpus order.
struct ReferenceText {
    struct Origin {
        std::size_t speech = 0;
        std::size_t word = 0;  // index among the speech's normalized words
    };
    std::vector<std::string> tokens;
    std::vector<Origin> origin;
    std::vector<std::size_t> speech_begin;  // first token of each speech

    static ReferenceText build(std::span<const textnorm::NormalizedText> normalized);
};

struct AssembleInput {
    std::string audio_id;
    std::span<const ctc::TimedWord> asr_words;
    double audio_end_ms = 0.0;
    std::span<const corpus::Speech> speeches;
    std::span<const textnorm::NormalizedText> normalized;  // parallel to speeches
    std::span<const match::MatchSpan> spans;                // over asr_words and the ReferenceText tokens
    std::span<const align::TokenTiming> timings;
};

// Builds the per-file record: aligned speeches with word timings on the
// original text, unmatched ASR runs, and speeches that found no audio. Entries
// follow the audio; unaligned speeches sit after the preceding corpus speech.
// Throws InconsistentInputs.
FileRecord assemble(const AssembleInput& input);

// Keeps an UnalignedSpeech entry only for speeches aligned in no file, and only
// in the first file (in the given order) that lists it.
void dedupe_unaligned(std::vector<FileRecord>& records);

nlohmann::json to_json(const FileRecord& record);
FileRecord file_record_from_json(const nlohmann::json& j);

}  // namespace longalign::postproc
