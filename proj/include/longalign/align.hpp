// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "longalign/ctc.hpp"
#include "longalign/matcher.hpp"

namespace longalign::align {

// Time extent of one reference token.
struct TokenTiming {
    std::size_t ref_token = 0;
    double start_ms = 0.0;
    double end_ms = 0.0;
};

struct AlignParams {
    std::size_t piece_tokens = 25;  // matched spans are cut into pieces of about this many reference words
    std::size_t edge_pad_frames = 25;  // how far a span may extend into the audio before/after its ASR words
};

// Force-aligns the reference words of every matched span to the frames spanned
// by its ASR words. Spans are cut between consecutive exact matches so each
// Viterbi pass stays short. Pieces that cannot be aligned are skipped.
std::vector<TokenTiming> align_spans(const ctc::LogitMatrix& logits, std::span<const ctc::TimedWord> asr_words,
                                     std::span<const std::string> ref_tokens,
                                     std::span<const match::MatchSpan> spans, const AlignParams& params = {});

}  // namespace longalign::align
