// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "longalign/logits.hpp"
#include "longalign/ngram_lm.hpp"
#include "longalign/segment.hpp"

namespace longalign::ctc {

struct TimedWord {
    std::string word;
    double start_ms = 0.0;
    double end_ms = 0.0;
    std::size_t start_frame = 0;
    std::size_t end_frame = 0;  // inclusive
};

struct DecodedHypothesis {
    std::string text;
    std::vector<TimedWord> words;
    double score = 0.0;
};

struct CharSpan {
    char32_t ch = 0;  // ' ' stands for the word delimiter
    std::size_t start_frame = 0;
    std::size_t end_frame = 0;  // inclusive
};

struct AlignmentPath {
    std::vector<CharSpan> chars;
    double score = 0.0;
};

struct BeamOptions {
    double alpha = 0.5;         // LM weight on natural-log LM probability
    double beta = 1.5;          // bonus per completed word
    std::size_t beam_width = 100;
    double token_min_logp = -5.0;  // labels below this are not expanded (the frame argmax always is)
    double prune_margin = 20.0;    // beams this far below the best are dropped
};

struct AlignOptions {
    // Accept (but do not require) one word delimiter before the first and after
    // the last reference character.
    bool optional_edge_delimiters = false;
};

DecodedHypothesis greedy_decode(const LogitMatrix& logits);

// CTC prefix beam search with word-level n-gram fusion applied whenever a word
// is closed. Prefix scores keep the best path (max) rather than the path sum.
// Frames outside `segments` are forced to blank. Throws InvalidSegment.
DecodedHypothesis beam_decode(const LogitMatrix& logits, const lm::ArpaModel* lm, const BeamOptions& options,
                              std::span<const SpeechSegment> segments = {});

// Viterbi alignment of a normalized character sequence (spaces become word
// delimiters). Among equally scored paths the one that advances latest wins.
// Throws TooShortAudio or UnknownSymbol.
AlignmentPath force_align(const LogitMatrix& logits, std::u32string_view ref_chars, const AlignOptions& options = {});

std::vector<TimedWord> word_offsets(const AlignmentPath& path, const LogitMatrix& logits);

}  // namespace longalign::ctc
